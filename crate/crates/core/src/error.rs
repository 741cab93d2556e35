use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, LadError>;

#[derive(Debug, Error)]
pub enum LadError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The detector reached a state where it cannot proceed, e.g. every row flagged.
    #[error("state error: {0}")]
    State(String),
    #[error("configuration error: {0}")]
    Config(String),
    /// Malformed or misaligned input data.
    #[error("format error: {0}")]
    Format(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LadError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        LadError::Domain(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        LadError::Format(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        LadError::Config(msg.into())
    }
}
