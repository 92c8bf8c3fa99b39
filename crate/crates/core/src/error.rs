use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("state space of {states} states exceeds the enumeration limit of {limit}")]
    Capacity { states: f64, limit: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("non-finite score at particle {particle}")]
    NonFiniteScore { particle: usize },

    #[error("all importance weights are zero")]
    DegenerateEnsemble,

    #[error("point {index} has zero mass under the null model")]
    ZeroMass { index: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
