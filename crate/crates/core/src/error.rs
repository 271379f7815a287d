use std::path::PathBuf;

/// Errors produced across the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input value lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),
    /// A configuration value violates its invariant.
    #[error("config error: {0}")]
    Config(String),
    /// A required input (for example scene ground truth) is missing.
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}
