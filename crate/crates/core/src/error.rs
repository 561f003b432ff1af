//! Crate-wide error type.
//!
//! Variants are grouped by failure class so callers (the CLI in particular)
//! can map them onto a stable exit-code taxonomy without matching on message
//! strings.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or inconsistent dimensions.
    #[error("config: {0}")]
    Config(String),

    /// Malformed input data (datasets, checkpoints, pricing files).
    #[error("format: {0}")]
    Format(String),

    /// Filesystem failure while reading or writing an artifact.
    #[error("io: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Training diverged or received gradients it cannot apply.
    #[error("training: {0}")]
    Training(String),

    /// Backend execution failed (simulated or remote).
    #[error("backend: {0}")]
    Backend(String),

    /// Remote endpoint rejected the request or returned garbage.
    #[error("protocol: {0}")]
    Protocol(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Exit-code class for CLI surfaces: config errors 2, io 3, training 4,
    /// backend 5.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Format(_) | Error::Io { .. } => 3,
            Error::Training(_) => 4,
            Error::Backend(_) | Error::Protocol(_) => 5,
        }
    }
}
