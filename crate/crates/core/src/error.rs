use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value (bad probability, wrong embedding width, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A file could not be parsed; carries the offending location.
    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Bad input data at runtime (label out of range, empty dialogue, ...).
    #[error("data error: {0}")]
    Data(String),

    /// A precondition of an operation was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Training was aborted (non-finite loss, missing gradient, ...).
    #[error("training error: {0}")]
    Train(String),

    /// Checkpoint and inputs are incompatible (vocabulary hash mismatch, ...).
    #[error("compatibility error: {0}")]
    Compatibility(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
