use thiserror::Error;

/// Errors produced by the geometry, estimation and evaluation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("feasible set is empty")]
    Empty,
    #[error("feasible set is unbounded")]
    Unbounded,
    #[error("degenerate region: {0}")]
    DegenerateRegion(String),
    #[error("invalid angle distribution: {0}")]
    InvalidDistribution(String),
    #[error("numerically degenerate: {0}")]
    NumericallyDegenerate(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("too many malformed rows: {malformed} of {total}")]
    TooManyMalformed { malformed: usize, total: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
