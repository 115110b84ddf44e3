//! Command-line surface.
//!
//! Every parameter flag is optional here so a config file can supply it; the
//! defaults live in [`crate::commands`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::settings::FloatList;

#[derive(Parser, Debug)]
#[command(name = "waysim", version, about = "Sweeps and audits for conservation-constrained measurements")]
pub struct Cli {
    /// Flat `key = value` file; command-line flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// CSV destination; stdout when absent or `-`.
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Override a tolerance by name, e.g. `--tolerance lattice=1e-5`. Repeatable.
    #[arg(long, global = true, value_name = "KEY=VALUE")]
    pub tolerance: Vec<String>,
    /// Drop the timestamp line so output bytes depend only on the inputs.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[arg(long, global = true)]
    pub hbar: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Minimal ‖η‖² of the Wigner spin model against probe size.
    WignerScan(WignerArgs),
    /// Position error/disturbance bounds over lattice presets.
    LatticeScan(LatticeArgs),
    /// One-row summary of a scheme file.
    Audit(AuditArgs),
    /// Effects of a built-in scenario, one matrix entry per row.
    PovmDump(DumpArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::WignerScan(_) => "wigner-scan",
            Command::LatticeScan(_) => "lattice-scan",
            Command::Audit(_) => "audit",
            Command::PovmDump(_) => "povm-dump",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Uniform,
    Optimize,
}

impl std::str::FromStr for ProfileArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

#[derive(Args, Debug)]
pub struct WignerArgs {
    #[arg(long)]
    pub n_min: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long, value_enum)]
    pub profile: Option<ProfileArg>,
    /// Random multistart points per model.
    #[arg(long)]
    pub starts: Option<usize>,
}

#[derive(Args, Debug)]
pub struct LatticeArgs {
    /// von-neumann, conserving, yanase or covariant.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Coupling strengths (ignored by yanase and covariant).
    #[arg(long, value_name = "LIST")]
    pub lambdas: Option<FloatList>,
    /// Probe widths in units of the spacing.
    #[arg(long, value_name = "LIST")]
    pub widths: Option<FloatList>,
    /// Centers of the admissible test family, in units of the spacing.
    #[arg(long, value_name = "LIST")]
    pub centers: Option<FloatList>,
    /// Widths of the admissible test family, in units of the spacing.
    #[arg(long, value_name = "LIST")]
    pub family_widths: Option<FloatList>,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    /// Scheme file to audit.
    pub scheme: Option<PathBuf>,
    /// Number of Haar-random system states sampled.
    #[arg(long)]
    pub states: Option<usize>,
}

#[derive(Args, Debug)]
pub struct DumpArgs {
    /// wigner, smeared, cnot or trivial.
    pub scenario: Option<String>,
    /// Populated probe levels (wigner).
    #[arg(long)]
    pub n: Option<usize>,
    /// `point` or `uniform:K` (smeared).
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long)]
    pub spacing: Option<f64>,
    /// System dimension (trivial).
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub starts: Option<usize>,
}
