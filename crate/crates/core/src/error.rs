use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("failed to parse configuration: {0}")]
    Parse(String),
}

impl ConfigError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Self::Invalid(msg.into())
    }
}

/// Raised when TD updates produce a non-finite value.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("GVF diverged: {detail}")]
pub struct Divergence {
    pub detail: String,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("agent diverged at step {step}: {source}")]
    Diverged {
        step: u64,
        #[source]
        source: Divergence,
        /// Log up to and including the faulting step, when available.
        partial: Option<Box<crate::harness::TrialLog>>,
    },
    #[error(transparent)]
    TrialOver(#[from] crate::env::TrialOver),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Format { path: PathBuf, line: usize, msg: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
