use thiserror::Error;

/// Errors raised anywhere in the lab.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("non-positive eigenvalue {value:e} at index {index}")]
    NotPositiveDefinite { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("vector is not unit norm (norm {0})")]
    NotUnit(f64),

    #[error("secular equation root {index} did not converge in {iterations} iterations")]
    SecularRoot { index: usize, iterations: usize },

    #[error("Jacobi sweeps did not converge")]
    JacobiNoConvergence,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not enough data: {0}")]
    NotEnoughData(String),

    #[error("bisection did not converge: {0}")]
    NoConvergence(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
