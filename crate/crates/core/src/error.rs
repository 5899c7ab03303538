use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the design toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value at {location}: {value}")]
    NonFinite { location: String, value: f64 },

    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },

    #[error("rank-deficient system: {0}")]
    RankDeficient(String),

    #[error("matrix of {entries} entries exceeds the dense cap of {cap}; use the matrix-free forward instead")]
    MatrixTooLarge { entries: u128, cap: u128 },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 for usage/config errors, 3 for
    /// numerical aborts.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFiniteLoss { .. } => 3,
            _ => 2,
        }
    }
}
