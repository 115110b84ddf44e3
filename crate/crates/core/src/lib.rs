//! Finite-dimensional simulator for quantum measurements under additive
//! conservation laws.
//!
//! The pieces, bottom up:
//!
//! * [`linalg`]: operators, states, partial traces, spectral tools.
//! * [`scheme`]: measurement schemes `⟨K, U, φ, Z, h⟩`, their POVMs and
//!   conditional states.
//! * [`wigner`]: Wigner's spin-½ model and its optimization.
//! * [`metrics`]: noise, error and disturbance quantities and their bounds.
//! * [`lattice`]: position/momentum on a cyclic lattice, with conserving presets.

pub mod config;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod metrics;
pub mod optimize;
pub mod parallel;
pub mod presets;
pub mod random;
pub mod scheme;
pub mod wigner;

pub use config::{Config, Tolerances};
pub use error::{Error, Result};
pub use linalg::{BipartiteDims, DensityOperator, Factor, Operator, StateVector, C64};
pub use parallel::Execution;
