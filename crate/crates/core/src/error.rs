use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("duplicate stakeholder label {0:?}")]
    DuplicateLabel(String),

    #[error("{path}:{line}: duplicate document id {id:?}")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
    },

    #[error("unknown topic {topic:?} (known topics: {})", known.join(", "))]
    UnknownTopic { topic: String, known: Vec<String> },

    #[error("{record}: unknown stakeholder label {label:?}")]
    UnknownLabel { record: String, label: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid prompt template {id:?}: {message}")]
    Template { id: String, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("provider {provider} failed: {message}")]
    Provider { provider: String, message: String },

    #[error("scorer backend {backend} failed: {message}")]
    Backend {
        backend: String,
        message: String,
        retryable: bool,
    },

    #[error("protocol error from {endpoint}: {message}")]
    Protocol { endpoint: String, message: String },

    #[error("encyclopedia lookup for {phrase:?} failed: {message}")]
    Knowledge { phrase: String, message: String },

    #[error("{path}: {source}")]
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

    /// Transport failures that a caller may reasonably retry.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            Error::Backend {
                retryable: true,
                ..
            } | Error::Knowledge { .. }
        )
    }
}
