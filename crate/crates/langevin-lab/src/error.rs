//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("iterate became non-finite at iteration {index}")]
    NonFiniteIterate { index: u64 },

    #[error("matrix is not symmetric: max |H - H^T| entry {defect:.3e} exceeds {tolerance:.3e}")]
    AsymmetricMatrix { defect: f64, tolerance: f64 },

    #[error("degenerate escape window: (16*D4 + 40)/lambda_H = {ratio} is not > 1")]
    DegenerateWindow { ratio: f64 },

    #[error("non-positive logarithm argument in {context}: {value}")]
    NonPositiveLog { context: String, value: f64 },

    #[error("unsupported problem for this operation: {0}")]
    UnsupportedProblem(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("matrix-product bound hypothesis violated: eta_{index} * |H| = {value} >= 1/2")]
    StepHypothesis { index: usize, value: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
