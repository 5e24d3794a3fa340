use std::io;
use std::path::PathBuf;

/// Errors produced by the word-spotting pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty transcription")]
    EmptyTranscription,

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("at least 2 stochastic passes are required, got {0}")]
    TooFewPasses(usize),

    #[error("no confidence for sample `{0}`")]
    MissingConfidence(String),

    #[error("{path}:{line}: {message}")]
    Data {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("model incompatible: {0}")]
    Incompatible(String),

    #[error("malformed model document: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used by the command-line driver to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Compatibility,
    Other,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Data { .. } | Error::Empty(_) | Error::EmptyTranscription => ErrorKind::Data,
            Error::Incompatible(_) | Error::Model(_) => ErrorKind::Compatibility,
            _ => ErrorKind::Other,
        }
    }

    pub(crate) fn shape(expected: usize, found: usize) -> Self {
        Error::ShapeMismatch { expected, found }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
