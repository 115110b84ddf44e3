//! Numerical constants shared by every module.
//!
//! Nothing here is physics; these are the thresholds the checks are run at.
//! All of them can be overridden by name (see [`Tolerances::set`]), which is
//! how the command line `--tolerance key=value` flag reaches them.

use crate::error::{Error, Result};

/// Largest joint Hilbert-space dimension accepted by [`crate::linalg::tensor`].
pub const DEFAULT_MAX_JOINT_DIM: usize = 4096;

/// Default reduced Planck constant (dimensionless units).
pub const DEFAULT_HBAR: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    /// `‖A − A†‖_max` below which an operator counts as Hermitian.
    pub hermitian: f64,
    /// Deviation of a state norm from 1.
    pub normalization: f64,
    /// `‖U†U − 1‖_max` accepted for scheme couplings.
    pub unitarity: f64,
    /// `‖Σ E − 1‖_max` accepted for a POVM.
    pub completeness: f64,
    /// Smallest eigenvalue allowed for an effect or density operator.
    pub positivity: f64,
    /// Pointer eigenvalues closer than this are merged into one outcome index.
    pub degeneracy: f64,
    /// Outcomes at or below this probability carry no normalized state.
    pub probability_floor: f64,
    /// Outcomes at or below this probability are skipped by repeatability checks.
    pub repeatability_floor: f64,
    /// Floor applied to variance denominators in the trade-off bounds.
    pub denominator_floor: f64,
    /// Residual budget for the spin-model constraints.
    pub wigner_residual: f64,
    /// Canonical-commutator and conservation budget on admissible lattice states (units of ħ).
    pub lattice: f64,
    /// Probability mass allowed outside the central half (position and momentum)
    /// for a lattice wave packet to count as admissible.
    pub admissible_mass: f64,
    /// Slack allowed on the pointwise error/disturbance inequalities.
    pub inequality_slack: f64,
    /// Slack allowed on the global position bounds.
    pub bound_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermitian: 1e-10,
            normalization: 1e-10,
            unitarity: 1e-9,
            completeness: 1e-9,
            positivity: 1e-10,
            degeneracy: 1e-8,
            probability_floor: 1e-12,
            repeatability_floor: 1e-9,
            denominator_floor: 1e-14,
            wigner_residual: 1e-8,
            lattice: 1e-6,
            admissible_mass: 5e-3,
            inequality_slack: 1e-9,
            bound_slack: 1e-6,
        }
    }
}

impl Tolerances {
    pub const NAMES: [&'static str; 14] = [
        "hermitian",
        "normalization",
        "unitarity",
        "completeness",
        "positivity",
        "degeneracy",
        "probability_floor",
        "repeatability_floor",
        "denominator_floor",
        "wigner_residual",
        "lattice",
        "admissible_mass",
        "inequality_slack",
        "bound_slack",
    ];

    fn slot(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "hermitian" => &mut self.hermitian,
            "normalization" => &mut self.normalization,
            "unitarity" => &mut self.unitarity,
            "completeness" => &mut self.completeness,
            "positivity" => &mut self.positivity,
            "degeneracy" => &mut self.degeneracy,
            "probability_floor" => &mut self.probability_floor,
            "repeatability_floor" => &mut self.repeatability_floor,
            "denominator_floor" => &mut self.denominator_floor,
            "wigner_residual" => &mut self.wigner_residual,
            "lattice" => &mut self.lattice,
            "admissible_mass" => &mut self.admissible_mass,
            "inequality_slack" => &mut self.inequality_slack,
            "bound_slack" => &mut self.bound_slack,
            _ => return None,
        })
    }

    /// Overrides one tolerance by name.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance `{name}` must be finite and non-negative, got {value}"
            )));
        }
        let slot = self
            .slot(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown tolerance `{name}`")))?;
        *slot = value;
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.clone().slot(name).map(|v| *v)
    }

    /// `(name, value)` pairs in a fixed order, for report headers.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        Self::NAMES
            .iter()
            .map(|n| (*n, self.get(n).expect("known name")))
            .collect()
    }
}

/// Run-wide configuration: ħ, tolerances, capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub hbar: f64,
    pub tol: Tolerances,
    pub max_joint_dim: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            hbar: DEFAULT_HBAR,
            tol: Tolerances::default(),
            max_joint_dim: DEFAULT_MAX_JOINT_DIM,
        }
    }
}
