use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unit {unit}: {message}")]
    Integrity { unit: u32, message: String },

    #[error("cannot split fleet: {0}")]
    Split(String),

    #[error("invalid synthetic spec: {0}")]
    Spec(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unsupported model format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("model file holds a `{found}` model, expected `{expected}`")]
    WrongModelKind { found: String, expected: &'static str },

    #[error("malformed model file: {0}")]
    Format(#[from] serde_json::Error),

    #[error("step called after the episode ended")]
    EpisodeEnded,

    #[error("non-finite value during training: {0}")]
    NonFinite(String),

    #[error("rollouts hit the horizon cap too often ({capped} of {total})")]
    HorizonCap { capped: usize, total: usize },

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

    pub(crate) fn dim(context: &'static str, expected: usize, got: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            got,
        }
    }
}
