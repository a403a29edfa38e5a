use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the embedding toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// Prefixes the message with the name of the stage that failed.
    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            Error::Format(m) => Error::Format(format!("[{stage}] {m}")),
            Error::Argument(m) => Error::Argument(format!("[{stage}] {m}")),
            Error::DegenerateInput(m) => Error::DegenerateInput(format!("[{stage}] {m}")),
            Error::Numerical(m) => Error::Numerical(format!("[{stage}] {m}")),
            Error::Resource(m) => Error::Resource(format!("[{stage}] {m}")),
            io @ Error::Io { .. } => io,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
