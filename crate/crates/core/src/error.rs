use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("fetch failed for {url}: {reason}")]
    Fetch { url: String, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: u64, reason: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("partition for target value {label} is empty")]
    DegeneratePartition { label: String },

    #[error("attribute model for '{attribute}': {source}")]
    Attribute {
        attribute: String,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
