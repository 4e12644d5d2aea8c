use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("singular element {element}: {reason}")]
    SingularElement { element: usize, reason: String },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("unsupported material: {0}")]
    UnsupportedMaterial(String),

    #[error("problem too large for dense analysis ({size} > {limit}); use a coarser mesh")]
    SizeLimit { size: usize, limit: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
