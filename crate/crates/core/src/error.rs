use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the forecasting engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes do not line up.
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller-side precondition was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Input data does not satisfy the dataset schema.
    #[error("validation error: {0}")]
    Validation(String),

    /// Malformed file content.
    #[error("format error at row {row}: {message}")]
    Format { row: usize, message: String },

    /// Fewer rows than one lookback window.
    #[error("insufficient history: need {needed} rows, got {got}")]
    InsufficientHistory { needed: usize, got: usize },

    /// Training produced a non-finite loss or parameter.
    #[error("training diverged in stage {stage} at epoch {epoch} (last finite epoch: {last_finite_epoch:?})")]
    Divergence {
        stage: String,
        epoch: usize,
        last_finite_epoch: Option<usize>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Dimension {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
