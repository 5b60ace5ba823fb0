use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the index structures and the point-file readers.
#[derive(Debug, Error)]
pub enum KdError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {id} has a non-finite coordinate")]
    NonFinite { id: u64 },

    #[error("points must have at least one coordinate")]
    ZeroDimension,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: row {row}: {msg}")]
    Parse { path: PathBuf, row: u64, msg: String },

    #[error("{path}: truncated payload, expected {expected} bytes but found {actual}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("{path}: bad magic, not a point file")]
    BadMagic { path: PathBuf },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = KdError> = std::result::Result<T, E>;
