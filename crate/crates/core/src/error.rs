use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = AlignError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("label vocabulary needs at least 2 distinct labels, got {0}")]
    VocabularyTooSmall(usize),

    #[error("duplicate label `{0}` in vocabulary")]
    DuplicateLabel(String),

    #[error("unknown label `{label}` for instance `{instance}`")]
    UnknownLabel { instance: String, label: String },

    #[error("duplicate instance id `{0}`")]
    DuplicateInstance(String),

    #[error("no common instances")]
    NoCommonInstances,

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("vocabulary mismatch between inputs")]
    VocabularyMismatch,

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("invalid count matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid representation matrix: {0}")]
    InvalidRepresentation(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("duplicate system id `{0}`")]
    DuplicateSystem(String),

    #[error("metric `{metric}` needs {what} for system `{system}`")]
    MissingAux {
        metric: String,
        system: String,
        what: &'static str,
    },

    #[error("system `{0}` has no family")]
    MissingFamily(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to write {path}: {message}")]
    Output { path: PathBuf, message: String },

    #[error("internal error: {0}")]
    Internal(String),
}

impl AlignError {
    /// Process exit status for this error: 1 for bad input, 2 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            AlignError::Output { .. } | AlignError::Internal(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        AlignError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn input(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        AlignError::Input {
            path: path.into(),
            message: message.into(),
        }
    }
}
