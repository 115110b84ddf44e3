//! Flat `key = value` config files and their merge with command-line flags.
//!
//! Keys use the long flag names (`n-min`, `family-widths`, ...); underscores
//! are accepted for hyphens. Tolerances are set with `tolerance.<name>`.
//! A flag given on the command line always wins over the file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use waysim::Tolerances;

use crate::report::CsvReport;
use crate::UsageError;

/// Every key a config file may carry, across all commands.
pub const KNOWN_KEYS: [&str; 22] = [
    "out",
    "seed",
    "threads",
    "hbar",
    "deterministic",
    "n-min",
    "n-max",
    "profile",
    "starts",
    "preset",
    "sites",
    "spacing",
    "lambdas",
    "widths",
    "centers",
    "family-widths",
    "scheme",
    "states",
    "scenario",
    "n",
    "kernel",
    "dim",
];

pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    /// key → (value, line number)
    entries: BTreeMap<String, (String, usize)>,
    tolerances: Vec<(String, String, usize)>,
    source: String,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source: &str) -> Result<Self, UsageError> {
        let mut cfg = ConfigFile { source: source.to_string(), ..Default::default() };
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(UsageError(format!("{source}:{line_no}: expected `key = value`")));
            };
            let key = k.trim().replace('_', "-");
            let value = v.trim().to_string();
            if let Some(name) = key.strip_prefix("tolerance.") {
                cfg.tolerances.push((name.replace('-', "_"), value, line_no));
                continue;
            }
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(UsageError(format!("{source}:{line_no}: unknown key `{}`", k.trim())));
            }
            if cfg.entries.insert(key.clone(), (value, line_no)).is_some() {
                return Err(UsageError(format!("{source}:{line_no}: key `{key}` given twice")));
            }
        }
        Ok(cfg)
    }

    /// `cli` if present, else the file's value for `key`, else `None`.
    pub fn pick<T: FromStr>(&self, cli: Option<T>, key: &str) -> Result<Option<T>, UsageError>
    where
        T::Err: fmt::Display,
    {
        if cli.is_some() {
            return Ok(cli);
        }
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse()
                .map(Some)
                .map_err(|e| UsageError(format!("{}:{line}: bad value for `{key}`: {e}", self.source))),
        }
    }

    pub fn pick_or<T: FromStr>(&self, cli: Option<T>, key: &str, default: T) -> Result<T, UsageError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.pick(cli, key)?.unwrap_or(default))
    }

    pub fn flag(&self, cli: bool, key: &str) -> Result<bool, UsageError> {
        Ok(cli || self.pick::<bool>(None, key)?.unwrap_or(false))
    }
}

/// Comma-separated floats, as in `--widths 1.6,1.8,2.0`.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatList(pub Vec<f64>);

impl FromStr for FloatList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let values = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| format!("`{t}` is not a finite number"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FloatList(values))
    }
}

impl fmt::Display for FloatList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Settings shared by every command.
#[derive(Clone, Debug, PartialEq)]
pub struct Common {
    pub seed: u64,
    pub hbar: f64,
    pub tol: Tolerances,
    pub deterministic: bool,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Common {
    pub fn resolve(
        cfg: &ConfigFile,
        seed: Option<u64>,
        hbar: Option<f64>,
        tolerance_flags: &[String],
        deterministic: bool,
        threads: Option<usize>,
        out: Option<PathBuf>,
    ) -> Result<Self, UsageError> {
        let hbar = cfg.pick_or(hbar, "hbar", waysim::config::DEFAULT_HBAR)?;
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(UsageError(format!("ħ must be positive, got {hbar}")));
        }
        let mut tol = Tolerances::default();
        for (name, value, line) in &cfg.tolerances {
            let v: f64 = value
                .parse()
                .map_err(|_| UsageError(format!("{}:{line}: bad tolerance value `{value}`", cfg.source)))?;
            tol.set(name, v).map_err(|e| UsageError(format!("{}:{line}: {e}", cfg.source)))?;
        }
        for flag in tolerance_flags {
            let (name, value) = flag
                .split_once('=')
                .ok_or_else(|| UsageError(format!("--tolerance expects KEY=VALUE, got `{flag}`")))?;
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| UsageError(format!("--tolerance {name}: bad value `{value}`")))?;
            tol.set(&name.trim().replace('-', "_"), v).map_err(|e| UsageError(e.to_string()))?;
        }
        let threads = cfg.pick(threads, "threads")?;
        if threads == Some(0) {
            return Err(UsageError("--threads must be at least 1".into()));
        }
        Ok(Self {
            seed: cfg.pick_or(seed, "seed", DEFAULT_SEED)?,
            hbar,
            tol,
            deterministic: cfg.flag(deterministic, "deterministic")?,
            threads,
            out: cfg.pick(out.map(|p| p.display().to_string()), "out")?.map(PathBuf::from),
        })
    }

    /// A report carrying the standard header. Thread count is left out so
    /// the bytes do not depend on it.
    pub fn start_report(&self, command: &str, params: &[(&str, String)], columns: &[&str]) -> CsvReport {
        let mut r = CsvReport::new(columns);
        r.comment("tool", format!("waysim {}", env!("CARGO_PKG_VERSION")));
        r.comment("command", command);
        r.comment("seed", self.seed);
        r.comment("hbar", self.hbar);
        for (k, v) in params {
            r.comment(k, v);
        }
        for (k, v) in self.tol.entries() {
            r.comment(&format!("tolerance.{k}"), format!("{v:e}"));
        }
        if !self.deterministic {
            let secs = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            r.comment("generated_unix", secs);
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_comments_and_tolerances() {
        let cfg = ConfigFile::parse("# c\nseed = 7\nn_min=2\n\ntolerance.lattice = 1e-5\n", "t").unwrap();
        assert_eq!(cfg.pick::<u64>(None, "seed").unwrap(), Some(7));
        assert_eq!(cfg.pick::<usize>(None, "n-min").unwrap(), Some(2));
        assert_eq!(cfg.pick(Some(9u64), "seed").unwrap(), Some(9));
        let c = Common::resolve(&cfg, None, None, &[], false, None, None).unwrap();
        assert_eq!(c.tol.lattice, 1e-5);
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let e = ConfigFile::parse("seed = 1\nfrobnicate = 2\n", "f.cfg").unwrap_err();
        assert!(e.0.contains("f.cfg:2") && e.0.contains("frobnicate"), "{}", e.0);
        assert!(ConfigFile::parse("just words\n", "f").is_err());
        assert!(ConfigFile::parse("seed=1\nseed=2\n", "f").is_err());
        let cfg = ConfigFile::parse("seed = x\n", "f").unwrap();
        assert!(cfg.pick::<u64>(None, "seed").is_err());
    }

    #[test]
    fn cli_tolerance_overrides_file() {
        let cfg = ConfigFile::parse("tolerance.lattice = 1e-5\n", "t").unwrap();
        let c = Common::resolve(&cfg, None, None, &["lattice=2e-5".into()], false, None, None).unwrap();
        assert_eq!(c.tol.lattice, 2e-5);
        assert!(Common::resolve(&cfg, None, None, &["nope=1".into()], false, None, None).is_err());
        assert!(Common::resolve(&cfg, None, None, &["lattice".into()], false, None, None).is_err());
        assert!(Common::resolve(&cfg, None, Some(-1.0), &[], false, None, None).is_err());
    }

    #[test]
    fn float_lists() {
        assert_eq!("1.5, 2,3e-1".parse::<FloatList>().unwrap().0, vec![1.5, 2.0, 0.3]);
        assert!("1,x".parse::<FloatList>().is_err());
        assert!("".parse::<FloatList>().unwrap().0.is_empty());
        assert!("nan".parse::<FloatList>().is_err());
    }

    #[test]
    fn deterministic_header_has_no_timestamp() {
        let mut c = Common::resolve(&ConfigFile::default(), None, None, &[], true, None, None).unwrap();
        let r = c.start_report("x", &[], &["a"]);
        assert!(!String::from_utf8(r.to_bytes()).unwrap().contains("generated_unix"));
        c.deterministic = false;
        let r = c.start_report("x", &[], &["a"]);
        assert!(String::from_utf8(r.to_bytes()).unwrap().contains("generated_unix"));
    }
}
