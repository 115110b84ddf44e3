use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("joint dimension {dim} exceeds the configured maximum {max}")]
    Capacity { dim: usize, max: usize },

    /// An input violated a documented contract (Hermiticity, unitarity, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("unknown outcome label `{0}`")]
    UnknownLabel(String),

    /// A model could not be built within tolerance. Carries the best residual reached.
    #[error("construction failed: {message} (best residual {residual:.3e})")]
    Construction { message: String, residual: f64 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(what: &str, expected: usize, got: usize) -> Error {
    Error::Dimension(format!("{what}: expected {expected}, got {got}"))
}
