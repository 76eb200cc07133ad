use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("{context}: {source}")]
    Core {
        context: &'static str,
        #[source]
        source: rcmdp_core::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{failed} of {total} invariant checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

impl HarnessError {
    pub(crate) fn core(context: &'static str) -> impl FnOnce(rcmdp_core::Error) -> Self {
        move |source| HarnessError::Core { context, source }
    }

    /// 2 for configuration problems, 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } | HarnessError::Invalid(_) => 2,
            HarnessError::Core { source, .. } if !source.is_numerical() => 2,
            HarnessError::Core { .. } | HarnessError::ChecksFailed { .. } => 3,
            HarnessError::Io { .. } | HarnessError::Csv { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
