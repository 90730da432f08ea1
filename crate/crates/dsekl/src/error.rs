//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: left vector has {left} features, right vector has {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("index {index} out of range for dataset of {len} rows")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("labels must be -1 or +1 after normalization, found {0}")]
    NonBinaryLabel(f64),

    #[error("non-finite gradient at iteration {iteration} ({detail})")]
    NonFiniteGradient { iteration: u64, detail: String },

    #[error(
        "dataset has {n} rows, above the {limit}-row guard for the full-Gram batch solver; \
         use the doubly stochastic trainer for data of this size"
    )]
    BatchGuard { n: usize, limit: usize },

    #[error("split fractions sum to {0:.6}, which exceeds 1")]
    FractionSum(f64),

    #[error("worker failure: {0}")]
    Worker(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
