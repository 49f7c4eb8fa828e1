use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Every problem found in the resolved configuration.
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("cannot parse {path:?}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    #[error("io error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] dftns::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::ConfigParse { .. } => "config_parse",
            CliError::Io { .. } => "io",
            CliError::Core(e) => match e {
                dftns::Error::Config(_) => "config",
                dftns::Error::Shape(_) => "shape",
                dftns::Error::Numeric(_) | dftns::Error::NonFiniteRow { .. } => "numeric",
                dftns::Error::State(_) => "state",
                dftns::Error::Unsupported(_) => "unsupported",
                dftns::Error::Parse { .. } => "parse",
                dftns::Error::Exhausted { .. } => "exhausted",
                dftns::Error::Io(_) => "io",
                dftns::Error::Json(_) => "json",
            },
        }
    }

    /// 2 for problems with the inputs, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::ConfigParse { .. } => 2,
            CliError::Core(dftns::Error::Config(_) | dftns::Error::Unsupported(_) | dftns::Error::Parse { .. }) => 2,
            _ => 1,
        }
    }

    /// The JSON object printed on stderr when a run fails.
    pub fn to_record(&self) -> serde_json::Value {
        let mut record = serde_json::json!({
            "status": "error",
            "kind": self.kind(),
            "message": self.to_string(),
        });
        if let CliError::Validation(problems) = self {
            record["violations"] = serde_json::json!(problems);
        }
        record
    }
}
