use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Unified error type for the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path:?}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("duplicate scan for subject {subject_id} expression {expression}")]
    DuplicateScan {
        subject_id: String,
        expression: String,
    },

    #[error("unknown label {value:?} for field {field}")]
    UnknownLabel { field: &'static str, value: String },

    #[error("expected 68 landmark lines, got {0}")]
    CountError(usize),

    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),

    #[error("mesh is empty")]
    EmptyMesh,

    #[error("empty result: {0}")]
    EmptyResult(String),

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("radial curve {curve} has no valid samples")]
    AllInvalidCurve { curve: usize },

    #[error("subject mismatch: {0} vs {1}")]
    SubjectMismatch(String, String),

    #[error("feature kind mismatch: {0} vs {1}")]
    KindMismatch(String, String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training data contains a single class")]
    SingleClass,

    #[error("training fold for subject {subject_id} lacks a gender class")]
    SingleClassFold { subject_id: String },

    #[error("degenerate variance: both samples are constant")]
    DegenerateVariance,

    #[error("too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("empty group: {0}")]
    EmptyGroup(String),

    #[error("non-finite input at cell ({0}, {1})")]
    NonFiniteInput(usize, usize),

    #[error("unknown alpha level {0}")]
    UnknownAlpha(f64),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// CLI exit code: 2 config, 3 data, 4 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Invariant(_)
            | Error::DuplicateScan { .. }
            | Error::UnknownLabel { .. }
            | Error::CountError(_)
            | Error::EmptyMesh
            | Error::EmptyResult(_)
            | Error::TooFewSamples { .. }
            | Error::EmptyGroup(_) => 3,
            _ => 4,
        }
    }
}
