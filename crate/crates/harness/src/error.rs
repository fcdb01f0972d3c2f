use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Core(#[from] gad_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("checkpoint integrity: {0}")]
    Integrity(String),

    #[error("unsupported checkpoint version {found:?} (expected {expected:?})")]
    Version { found: String, expected: String },

    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    /// Process exit code: 2 configuration, 3 numeric failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Core(gad_core::Error::NonFinite(_)) => 3,
            HarnessError::Core(_) => 2,
            HarnessError::Io { .. }
            | HarnessError::Integrity(_)
            | HarnessError::Version { .. }
            | HarnessError::Parse { .. } => 4,
        }
    }
}
