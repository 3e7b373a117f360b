use thiserror::Error;

/// Errors raised by the fairness pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid norm order {0}: must be a finite value >= 1")]
    InvalidNormOrder(f64),

    #[error("invalid fairness constant c = {0}: must be a finite value >= 1")]
    InvalidFairnessConstant(f64),

    #[error("invalid polynomial degree {0}: must be >= 1")]
    InvalidDegree(usize),

    #[error("empty input")]
    Empty,

    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("every point coincides with the reference point")]
    DegenerateReference,

    #[error("score {value} at row {row} is outside [0, 1]")]
    ScoreOutOfRange { row: usize, value: f64 },

    #[error("value {value} at row {row} is outside the normalized domain [-1, 1]")]
    NotNormalized { row: usize, value: f64 },

    #[error("non-finite value at row {row}")]
    NonFinite { row: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
