//! `waysim` command-line driver.
//!
//! [`run`] takes the argument list and two writers and returns the process
//! exit code, so the whole CLI can be exercised in-process:
//!
//! * `0`: success;
//! * `1`: a row failed or a checked inequality was violated;
//! * `2`: usage, config, parse or validation error.

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use clap::Parser;

pub mod cli;
pub mod commands;
pub mod report;
pub mod settings;

use cli::Cli;
use settings::{Common, ConfigFile};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VIOLATION: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// A problem with the invocation or its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug)]
pub enum RunError {
    Usage(String),
    Core(waysim::Error),
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            // The inputs were fine; the numerics did not deliver.
            RunError::Core(waysim::Error::Construction { .. } | waysim::Error::Numeric(_)) => EXIT_VIOLATION,
            _ => EXIT_USAGE,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Usage(m) | RunError::Io(m) => f.write_str(m),
            RunError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<UsageError> for RunError {
    fn from(e: UsageError) -> Self {
        RunError::Usage(e.0)
    }
}

impl From<waysim::Error> for RunError {
    fn from(e: waysim::Error) -> Self {
        RunError::Core(e)
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
                EXIT_USAGE
            } else {
                let _ = stdout.write_all(text.as_bytes());
                EXIT_OK
            };
        }
    };
    match execute(&cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "waysim {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<u8, RunError> {
    let cfg = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let common = Common::resolve(
        &cfg,
        cli.seed,
        cli.hbar,
        &cli.tolerance,
        cli.deterministic,
        cli.threads,
        cli.out.clone(),
    )?;
    let outcome = match common.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| RunError::Io(format!("thread pool: {e}")))?
            .install(|| commands::dispatch(&cli.command, &cfg, &common))?,
        None => commands::dispatch(&cli.command, &cfg, &common)?,
    };

    let bytes = outcome.report.to_bytes();
    let target = common.out.as_deref().filter(|p| *p != Path::new("-"));
    match target {
        None => stdout.write_all(&bytes).map_err(|e| RunError::Io(format!("stdout: {e}")))?,
        Some(p) => std::fs::write(p, &bytes).map_err(|e| RunError::Io(format!("cannot write {}: {e}", p.display())))?,
    }
    if !outcome.diagnostics.is_empty() {
        let text: String = outcome.diagnostics.iter().map(|d| format!("{d}\n")).collect();
        match target {
            None => {
                let _ = stderr.write_all(text.as_bytes());
            }
            Some(p) => {
                let mut side = p.as_os_str().to_owned();
                side.push(".diag");
                std::fs::write(&side, text).map_err(|e| RunError::Io(format!("cannot write diagnostics: {e}")))?;
            }
        }
    }
    Ok(if outcome.violation { EXIT_VIOLATION } else { EXIT_OK })
}
