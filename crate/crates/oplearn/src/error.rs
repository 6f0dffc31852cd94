use std::path::PathBuf;

use thiserror::Error;

/// Harness failures, grouped by process exit code.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Validation(String),
    #[error("lineage mismatch: {0}")]
    Lineage(String),
    #[error(transparent)]
    Numeric(#[from] oplearn_core::Error),
    #[error("oracle check failed: {0}")]
    Oracle(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: malformed file at byte {offset}: {msg}", path.display())]
    Format {
        path: PathBuf,
        offset: u64,
        msg: String,
    },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Validation(_) | HarnessError::Lineage(_) => 1,
            HarnessError::Numeric(oplearn_core::Error::InvalidInput(_))
            | HarnessError::Numeric(oplearn_core::Error::ShapeMismatch { .. }) => 1,
            HarnessError::Numeric(_) | HarnessError::Oracle(_) => 2,
            HarnessError::Io { .. } | HarnessError::Format { .. } => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| HarnessError::Io { path, source }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
