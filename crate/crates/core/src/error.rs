use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, RomError>;

#[derive(Debug, Error)]
pub enum RomError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error(
        "snapshot {index} has zero norm ({norm:e}); the solution manifold must not contain the zero solution"
    )]
    ZeroSnapshot { index: usize, norm: f64 },

    #[error("zero-norm argument: sine dissimilarity and projection errors require nonzero vectors")]
    ZeroVector,

    #[error("inner-product weight is not positive definite: <u,u> = {0:e}")]
    NotPositiveDefinite(f64),

    #[error("basis is not orthonormal: Gram deviation {0:e} exceeds 1e-8")]
    NotOrthonormal(f64),

    #[error("invalid dissimilarity matrix: {0}")]
    InvalidDissimilarity(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("malformed snapshot file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl RomError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RomError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user configuration rather than by the data.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            RomError::InvalidParameter(_) | RomError::TooLarge(_) | RomError::Json(_)
        )
    }
}
