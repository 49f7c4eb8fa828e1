use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// A non-finite value tied to a specific batch row.
    #[error("numeric error at batch row {row}: {message}")]
    NonFiniteRow { row: usize, message: String },

    #[error("state error: {0}")]
    State(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("parse error in {path:?} at row {row}, column {column:?}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("sample source exhausted: requested {requested} samples but only {available} available")]
    Exhausted { requested: usize, available: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}
