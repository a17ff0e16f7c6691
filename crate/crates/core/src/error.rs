use thiserror::Error;

/// Errors raised by the transport library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("epsilon must be positive (got {0})")]
    NonPositiveEpsilon(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty point list")]
    EmptyPointSet,

    #[error("measure has zero mass")]
    ZeroMass,

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("unbalanced problem: total masses {mass0} and {mass1} differ")]
    Unbalanced { mass0: f64, mass1: f64 },

    #[error("weights must be strictly positive")]
    NonPositiveWeight,

    #[error("step size must be positive (got {0})")]
    NonPositiveStep(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("atomic scaling not pointwise evaluable at t = 0")]
    NotPointwiseEvaluable,

    #[error("bridge times must lie in the open interval (0, 1), got {0}")]
    EndpointTime(f64),

    #[error("solver diverged after {iterations} iterations")]
    Diverged { iterations: usize },

    #[error("solver did not reach tolerance in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
