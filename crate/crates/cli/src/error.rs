use std::path::PathBuf;

use termsim_core::Error as CoreError;

/// Driver-level error with a process exit code attached.
///
/// Codes: 1 usage/configuration, 2 data (input files, artifact mismatch),
/// 3 internal invariant violation.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> CliError {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) | CliError::Io { .. } => 2,
            CliError::Internal(_) => 3,
            CliError::Core(e) => match e {
                CoreError::VocabTooSmall { .. } | CoreError::BatchTooSmall(_) => 1,
                CoreError::DuplicateProductId(_)
                | CoreError::DuplicateQueryId(_)
                | CoreError::DuplicateLabel { .. }
                | CoreError::EmptyTitle(_)
                | CoreError::EmptyQueryText(_)
                | CoreError::Unbalanceable { .. }
                | CoreError::EmptyCorpus
                | CoreError::NoTrainingPairs
                | CoreError::VocabFingerprintMismatch { .. }
                | CoreError::ModelFingerprintMismatch { .. }
                | CoreError::UnknownProduct(_)
                | CoreError::UnknownQuery(_) => 2,
                CoreError::TokenOutOfRange { .. }
                | CoreError::EmptyEncoding
                | CoreError::DimMismatch { .. }
                | CoreError::Invariant(_) => 3,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
