use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid token: {0}")]
    InvalidToken(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("corpus contains no sentences")]
    EmptyCorpus,

    #[error("label error: {0}")]
    Label(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("index {index} out of bounds for {op} (len {len})")]
    Index {
        op: &'static str,
        index: usize,
        len: usize,
    },

    #[error("non-finite value produced by {0}")]
    Numeric(String),

    #[error("graph construction is not deterministic: {0}")]
    Determinism(String),

    #[error("state error: {0}")]
    State(String),

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// The subsystem an error originates from, used in CLI diagnostics.
    pub fn module(&self) -> &'static str {
        match self {
            Error::InvalidToken(_) | Error::Parse { .. } | Error::EmptyCorpus | Error::Io { .. } => {
                "data"
            }
            Error::Label(_) => "eval",
            Error::Shape { .. } | Error::Index { .. } | Error::Numeric(_) | Error::Determinism(_) => {
                "autodiff"
            }
            Error::State(_) | Error::ModelFormat(_) => "model",
            Error::Config(_) => "trainer",
            Error::Verification(_) | Error::Usage(_) => "cli",
        }
    }

    /// Process exit code: 1 usage, 2 data, 3 numeric, 4 verification.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) => 1,
            Error::InvalidToken(_)
            | Error::Parse { .. }
            | Error::EmptyCorpus
            | Error::Label(_)
            | Error::ModelFormat(_)
            | Error::Io { .. } => 2,
            Error::Shape { .. }
            | Error::Index { .. }
            | Error::Numeric(_)
            | Error::Determinism(_)
            | Error::State(_) => 3,
            Error::Verification(_) => 4,
        }
    }
}
