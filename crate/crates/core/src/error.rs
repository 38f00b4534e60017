use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The observations themselves are unusable (non-finite, degenerate, too few).
    #[error("input error: {0}")]
    Input(String),

    /// A text source could not be parsed.
    #[error("format error: {0}")]
    Format(String),

    #[error("empty sample: {0}")]
    EmptySample(String),

    /// Configuration rejected; carries every violation found.
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("network error: {0}")]
    Network(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
