use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the estimator pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("matrix is not positive definite: pivot {index} is {pivot:e} (add jitter)")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("shifted tridiagonal system is singular at row {index} (pivot {pivot:e})")]
    SingularShiftedSystem { index: usize, pivot: f64 },

    #[error("row set is rank deficient at row {row}")]
    RankDeficient { row: usize },

    #[error("unsupported rational approximation order {0}")]
    UnsupportedOrder(usize),

    #[error("evaluation at a pole (z = {0})")]
    PoleEvaluation(f64),

    #[error("denominator roots could not be isolated: found {found} of {expected}")]
    RepeatedRoot { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{context}: {cause}")]
    Context {
        context: String,
        cause: Box<Error>,
    },

    #[error("I/O error on {path}: {cause}")]
    Io {
        path: PathBuf,
        cause: std::io::Error,
    },

    #[error("CSV error on {path}: {cause}")]
    Csv {
        path: PathBuf,
        cause: csv::Error,
    },

    #[error("JSON error on {path}: {cause}")]
    Json {
        path: PathBuf,
        cause: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Wraps the error with a short description of what was being attempted.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            cause: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
