//! The four subcommands. Each resolves its parameters, runs, and returns a
//! report plus any per-row diagnostics.

use waysim::lattice::{
    position_sweep, site_bins, smeared_position_povm, spearman, AdmissibleFamily, Lattice, PresetKind,
    SmearKernel, SweepConfig,
};
use waysim::metrics::{summarize, MetricContext};
use waysim::scheme::format::parse_scheme;
use waysim::scheme::{ConservedPair, Povm};
use waysim::wigner::{build_wigner_model, scaling_study, Profile, SearchConfig, WignerProbeSpec};
use waysim::{presets, Execution, Operator};

use crate::cli::{AuditArgs, Command, DumpArgs, LatticeArgs, ProfileArg, WignerArgs};
use crate::report::{num, CsvReport};
use crate::settings::{Common, ConfigFile, FloatList};
use crate::{RunError, UsageError};

pub const DEFAULT_N_RANGE: (usize, usize) = (1, 8);
pub const MAX_N: usize = 24;
pub const DEFAULT_WIDTHS: [f64; 6] = [1.6, 1.76, 1.92, 2.08, 2.24, 2.4];
pub const DEFAULT_STATES: usize = 200;

pub const WIGNER_COLUMNS: [&str; 6] = ["n", "eta_sq", "formula", "ratio", "conservation_residual", "form_residual"];

pub const LATTICE_COLUMNS: [&str; 19] = [
    "preset",
    "lambda",
    "probe_width",
    "delta_pA",
    "epsilon_sq",
    "bound_eq7",
    "slack_eps",
    "mu_sq",
    "bound_mu",
    "slack_mu",
    "yanase_residual",
    "conservation_residual",
    "kernel_width",
    "numerator_eps",
    "numerator_mu",
    "commutator_defect",
    "kernel_flagged",
    "applicable",
    "bound_kind",
];

pub const AUDIT_COLUMNS: [&str; 11] = [
    "completeness_residual",
    "min_eigenvalue",
    "conservation_residual",
    "yanase_residual",
    "epsilon",
    "epsilon_global",
    "mu",
    "mu_global",
    "min_slack_eps",
    "min_slack_mu",
    "states",
];

pub const DUMP_COLUMNS: [&str; 5] = ["label", "row", "col", "re", "im"];

/// What a command hands back to the driver.
#[derive(Debug)]
pub struct Outcome {
    pub report: CsvReport,
    /// Per-row failures and warnings, written to the sidecar.
    pub diagnostics: Vec<String>,
    /// Some row failed or a checked inequality was violated.
    pub violation: bool,
}

pub fn dispatch(command: &Command, cfg: &ConfigFile, common: &Common) -> Result<Outcome, RunError> {
    match command {
        Command::WignerScan(a) => wigner_scan(a, cfg, common),
        Command::LatticeScan(a) => lattice_scan(a, cfg, common),
        Command::Audit(a) => audit(a, cfg, common),
        Command::PovmDump(a) => povm_dump(a, cfg, common),
    }
}

fn search_config(common: &Common, starts: usize) -> SearchConfig {
    SearchConfig { starts, seed: common.seed, exec: Execution::Parallel, ..SearchConfig::default() }
}

fn floats(cfg: &ConfigFile, cli: &Option<FloatList>, key: &str, default: &[f64]) -> Result<Vec<f64>, UsageError> {
    let list = cfg.pick_or(cli.clone(), key, FloatList(default.to_vec()))?.0;
    if list.is_empty() {
        return Err(UsageError(format!("`{key}` list is empty")));
    }
    Ok(list)
}

pub fn wigner_scan(args: &WignerArgs, cfg: &ConfigFile, common: &Common) -> Result<Outcome, RunError> {
    let n_min = cfg.pick_or(args.n_min, "n-min", DEFAULT_N_RANGE.0)?;
    let n_max = cfg.pick_or(args.n_max, "n-max", DEFAULT_N_RANGE.1)?;
    if n_min < 1 || n_min > n_max || n_max > MAX_N {
        return Err(UsageError(format!("n range {n_min}..={n_max} is empty or outside 1..={MAX_N}")).into());
    }
    let profile_arg = cfg.pick_or(args.profile, "profile", ProfileArg::Uniform)?;
    let starts = cfg.pick_or(args.starts, "starts", SearchConfig::default().starts)?;
    let profile = match profile_arg {
        ProfileArg::Uniform => Profile::Uniform,
        ProfileArg::Optimize => Profile::Optimize,
    };
    let profile_name = match profile_arg {
        ProfileArg::Uniform => "uniform",
        ProfileArg::Optimize => "optimize",
    };
    let study = scaling_study(n_min, n_max, &profile, &search_config(common, starts), &common.tol)?;

    let params = [
        ("n_min", n_min.to_string()),
        ("n_max", n_max.to_string()),
        ("profile", profile_name.to_string()),
        ("starts", starts.to_string()),
    ];
    let mut report = common.start_report("wigner-scan", &params, &WIGNER_COLUMNS);
    let mut diagnostics = Vec::new();
    for row in &study.rows {
        match &row.model {
            Ok(v) => report.row(vec![
                row.n.to_string(),
                num(v.eta_sq),
                num(v.formula),
                num(v.ratio),
                num(v.conservation_residual),
                num(v.form_residual),
            ]),
            Err(e) => {
                diagnostics.push(format!("n={}: {e}", row.n));
                let mut cells = vec![row.n.to_string()];
                cells.extend(std::iter::repeat_n(num(f64::NAN), WIGNER_COLUMNS.len() - 1));
                report.row(cells);
            }
        }
    }
    report.footer("slope_loglog", num(study.slope.unwrap_or(f64::NAN)));
    if profile_arg == ProfileArg::Optimize {
        for row in &study.rows {
            if let Ok(v) = &row.model {
                let w: Vec<String> = v.weights.iter().map(|x| num(*x)).collect();
                report.footer(&format!("weights n={}", row.n), w.join(" "));
            }
        }
    }
    let violation = !diagnostics.is_empty();
    Ok(Outcome { report, diagnostics, violation })
}

pub fn lattice_scan(args: &LatticeArgs, cfg: &ConfigFile, common: &Common) -> Result<Outcome, RunError> {
    let kind: PresetKind = cfg
        .pick_or(args.preset.clone(), "preset", "yanase".to_string())?
        .parse()
        .map_err(|e: waysim::Error| UsageError(e.to_string()))?;
    let sites = cfg.pick_or(args.sites, "sites", Lattice::DEFAULT_SITES)?;
    let spacing = cfg.pick_or(args.spacing, "spacing", 1.0)?;
    let lambdas = floats(cfg, &args.lambdas, "lambdas", &[1.0])?;
    let widths = floats(cfg, &args.widths, "widths", &DEFAULT_WIDTHS)?;
    let fam = AdmissibleFamily::default();
    let centers = floats(cfg, &args.centers, "centers", &fam.centers)?;
    let family_widths = floats(cfg, &args.family_widths, "family-widths", &fam.widths)?;
    let lat = Lattice::new(sites, spacing, common.hbar)?;
    let sweep = SweepConfig {
        kind,
        lambdas: lambdas.clone(),
        widths: widths.clone(),
        family: AdmissibleFamily { centers: centers.clone(), widths: family_widths.clone() },
        exec: Execution::Parallel,
    };
    let rows = position_sweep(&lat, &sweep, &common.tol)?;

    let params = [
        ("preset", kind.name().to_string()),
        ("sites", sites.to_string()),
        ("spacing", spacing.to_string()),
        ("lambdas", FloatList(lambdas.clone()).to_string()),
        ("widths", FloatList(widths.clone()).to_string()),
        ("centers", FloatList(centers).to_string()),
        ("family_widths", FloatList(family_widths).to_string()),
    ];
    let mut report = common.start_report("lattice-scan", &params, &LATTICE_COLUMNS);
    let mut diagnostics = Vec::new();
    let (mut kw, mut dp) = (Vec::new(), Vec::new());
    let (mut min_eps, mut min_mu) = (f64::INFINITY, f64::INFINITY);
    let fixed = matches!(kind, PresetKind::Yanase | PresetKind::Covariant);
    let nw = widths.len();
    for (k, row) in rows.iter().enumerate() {
        match row {
            Ok(r) => {
                report.row(vec![
                    r.preset.name().to_string(),
                    num(r.lambda),
                    num(r.probe_width),
                    num(r.delta_pa),
                    num(r.epsilon_sq),
                    num(r.bound_eq7),
                    num(r.slack_eps),
                    num(r.mu_sq),
                    num(r.bound_mu),
                    num(r.slack_mu),
                    num(r.yanase_residual),
                    num(r.conservation_residual),
                    num(r.kernel_width),
                    num(r.numerator_eps),
                    num(r.numerator_mu),
                    num(r.commutator_defect),
                    r.kernel_flagged.to_string(),
                    r.applicable.to_string(),
                    r.bound_kind.name().to_string(),
                ]);
                kw.push(r.kernel_width);
                dp.push(r.delta_pa);
                min_eps = min_eps.min(r.slack_eps);
                min_mu = min_mu.min(r.slack_mu);
            }
            Err(e) => {
                let lambda = if fixed { f64::NAN } else { lambdas[k / nw] };
                let width = widths[k % nw];
                diagnostics.push(format!("{} lambda={lambda} width={width}: {e}", kind.name()));
                let mut cells = vec![kind.name().to_string(), num(lambda), num(width)];
                cells.extend(std::iter::repeat_n(num(f64::NAN), LATTICE_COLUMNS.len() - 3));
                report.row(cells);
            }
        }
    }
    let finite_or_nan = |v: f64| if v.is_finite() { v } else { f64::NAN };
    let rho = if kw.len() >= 3 { spearman(&kw, &dp) } else { f64::NAN };
    report.footer("spearman_kernel_width_delta_pA", num(rho));
    report.footer("min_slack_eps", num(finite_or_nan(min_eps)));
    report.footer("min_slack_mu", num(finite_or_nan(min_mu)));
    let limit = -common.tol.bound_slack;
    let violated = min_eps < limit || min_mu < limit;
    if violated {
        diagnostics.push(format!("row slack below {limit:e}"));
    }
    let violation = violated || rows.iter().any(|r| r.is_err());
    Ok(Outcome { report, diagnostics, violation })
}

pub fn audit(args: &AuditArgs, cfg: &ConfigFile, common: &Common) -> Result<Outcome, RunError> {
    let path = cfg
        .pick(args.scheme.as_ref().map(|p| p.display().to_string()), "scheme")?
        .ok_or_else(|| UsageError("audit needs a scheme file".into()))?;
    let states = cfg.pick_or(args.states, "states", DEFAULT_STATES)?;
    if states == 0 {
        return Err(UsageError("--states must be at least 1".into()).into());
    }
    let text = std::fs::read_to_string(&path).map_err(|e| UsageError(format!("cannot read {path}: {e}")))?;
    let file = parse_scheme(&text, &common.tol).map_err(|e| UsageError(format!("{path}: {e}")))?;
    let scheme = &file.scheme;
    let dims = scheme.dims();
    let povm = scheme.induced_povm()?;
    let mut diagnostics = Vec::new();

    let pair = file.pair()?;
    let (conservation, yanase) = match &pair {
        Some(p) => (scheme.conservation_residual(p)?, scheme.yanase_residual(p)?),
        None => {
            diagnostics.push("no L1/L2 blocks: conservation, Yanase and bound columns are NaN".into());
            (f64::NAN, f64::NAN)
        }
    };
    let m = file.m.clone().or_else(|| povm.first_moment());
    let nan = f64::NAN;
    let (mut eps, mut eps_global, mut mu, mut mu_global, mut slack_eps, mut slack_mu) = (nan, nan, nan, nan, nan, nan);
    match m {
        None => diagnostics.push("no M block and non-numeric labels: ε and μ are NaN".into()),
        Some(m) => {
            let ctx_pair = match &pair {
                Some(p) => p.clone(),
                None => ConservedPair::new(Operator::zeros(dims.system), Operator::zeros(dims.probe))?,
            };
            let ctx = MetricContext::new(scheme.clone(), m, ctx_pair, common.hbar)?;
            let s = summarize(&ctx.sample_reports(states, common.seed, Execution::Parallel)?);
            eps = s.max_epsilon_sq.sqrt();
            mu = s.max_mu_sq.sqrt();
            eps_global = ctx.global_noise()?;
            mu_global = ctx.global_repeatability()?;
            if pair.is_some() {
                slack_eps = s.min_slack_eps;
                slack_mu = s.min_slack_mu;
            }
        }
    }
    let completeness = povm.completeness_residual();
    let min_eig = povm.min_eigenvalue()?;

    let params = [("scheme", path.clone()), ("states", states.to_string())];
    let mut report = common.start_report("audit", &params, &AUDIT_COLUMNS);
    report.row(vec![
        num(completeness),
        num(min_eig),
        num(conservation),
        num(yanase),
        num(eps),
        num(eps_global),
        num(mu),
        num(mu_global),
        num(slack_eps),
        num(slack_mu),
        states.to_string(),
    ]);
    let tol = &common.tol;
    let mut violation = false;
    if completeness > tol.completeness {
        diagnostics.push(format!("completeness residual {completeness:e} > {:e}", tol.completeness));
        violation = true;
    }
    if min_eig < -tol.positivity {
        diagnostics.push(format!("negative effect eigenvalue {min_eig:e}"));
        violation = true;
    }
    if slack_eps < -tol.inequality_slack || slack_mu < -tol.inequality_slack {
        diagnostics.push(format!("bound violated: min slack ε {slack_eps:e}, μ {slack_mu:e}"));
        violation = true;
    }
    Ok(Outcome { report, diagnostics, violation })
}

/// `point` or `uniform:K`.
fn parse_kernel(spec: &str, sites: usize) -> Result<SmearKernel, RunError> {
    if spec == "point" {
        return Ok(SmearKernel::point_mass(sites)?);
    }
    let half = spec
        .strip_prefix("uniform:")
        .and_then(|k| k.parse::<usize>().ok())
        .ok_or_else(|| UsageError(format!("kernel must be `point` or `uniform:K`, got `{spec}`")))?;
    SmearKernel::uniform(sites, half).map_err(|e| UsageError(e.to_string()).into())
}

pub fn povm_dump(args: &DumpArgs, cfg: &ConfigFile, common: &Common) -> Result<Outcome, RunError> {
    let scenario = cfg
        .pick(args.scenario.clone(), "scenario")?
        .ok_or_else(|| UsageError("povm-dump needs a scenario: wigner, smeared, cnot or trivial".into()))?;
    let tol = &common.tol;
    let mut params = vec![("scenario", scenario.clone())];
    let mut extra = Vec::new();
    let povm: Povm = match scenario.as_str() {
        "wigner" => {
            let n = cfg.pick_or(args.n, "n", 3)?;
            let starts = cfg.pick_or(args.starts, "starts", SearchConfig::default().starts)?;
            params.push(("n", n.to_string()));
            params.push(("starts", starts.to_string()));
            let model = build_wigner_model(&WignerProbeSpec::uniform(n), &search_config(common, starts), tol)?;
            extra.push(("eta_sq", num(model.eta_sq)));
            model.scheme.induced_povm()?
        }
        "smeared" => {
            let sites = cfg.pick_or(args.sites, "sites", Lattice::DEFAULT_SITES)?;
            let spacing = cfg.pick_or(args.spacing, "spacing", 1.0)?;
            let kernel = cfg.pick_or(args.kernel.clone(), "kernel", "point".to_string())?;
            params.push(("sites", sites.to_string()));
            params.push(("spacing", spacing.to_string()));
            params.push(("kernel", kernel.clone()));
            let lat = Lattice::new(sites, spacing, common.hbar)?;
            let k = parse_kernel(&kernel, sites)?;
            smeared_position_povm(&lat, &k, &site_bins(&lat), tol)?
        }
        "cnot" => presets::cnot(tol)?.induced_povm()?,
        "trivial" => {
            let dim = cfg.pick_or(args.dim, "dim", 2)?;
            params.push(("dim", dim.to_string()));
            presets::trivial(dim, tol)?.induced_povm()?
        }
        other => {
            return Err(UsageError(format!(
                "unknown scenario `{other}` (expected wigner, smeared, cnot or trivial)"
            ))
            .into())
        }
    };
    let mut report = common.start_report("povm-dump", &params, &DUMP_COLUMNS);
    for (label, e) in povm.effects() {
        let m = e.matrix();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                report.row(vec![label.clone(), i.to_string(), j.to_string(), num(z.re), num(z.im)]);
            }
        }
    }
    let completeness = povm.completeness_residual();
    report.footer("effects", povm.effects().len());
    report.footer("completeness_residual", num(completeness));
    report.footer("min_eigenvalue", num(povm.min_eigenvalue()?));
    for (k, v) in extra {
        report.footer(k, v);
    }
    let mut diagnostics = Vec::new();
    if completeness > tol.completeness {
        diagnostics.push(format!("completeness residual {completeness:e} > {:e}", tol.completeness));
    }
    let violation = !diagnostics.is_empty();
    Ok(Outcome { report, diagnostics, violation })
}
