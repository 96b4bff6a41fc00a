use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("cannot parse config: {0}")]
    ConfigParse(String),

    #[error("unknown task `{0}` (expected quadratic_bowl, logistic_synth or mlp_regression)")]
    UnknownTask(String),

    #[error("no traces to summarize")]
    EmptyInput,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Engine(#[from] adafrugal::Error),
}

impl WorkbenchError {
    pub fn config(field: &str, reason: impl Into<String>) -> Self {
        WorkbenchError::Config {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        WorkbenchError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for a diverged run, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            WorkbenchError::Engine(adafrugal::Error::NonFiniteLoss { .. }) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, WorkbenchError>;
