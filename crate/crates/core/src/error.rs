use std::path::PathBuf;

use thiserror::Error;

use crate::model::Status;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scorer error: {0}")]
    Scorer(#[from] crate::scorer::ScorerError),

    #[error("encoding error: {0}")]
    Encode(String),

    #[error("illegal status transition {from:?} -> {to:?} for triplet {triplet_id}")]
    Transition {
        triplet_id: String,
        from: Status,
        to: Status,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn arg(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
