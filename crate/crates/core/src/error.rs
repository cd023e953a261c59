use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not positive definite (last jitter tried: {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("csv parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("non-positive target values at rows {rows:?}")]
    NonPositiveTarget { rows: Vec<usize> },

    #[error("point {point:?} is outside the bounds of feature `{feature}` ([{lower}, {upper}])")]
    OutOfBounds {
        feature: String,
        point: Vec<f64>,
        lower: f64,
        upper: f64,
    },

    #[error("expression error: {0}")]
    Expression(String),

    #[error("objective is not finite at parameters {params:?}")]
    NonFiniteObjective { params: Vec<f64> },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("model format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
