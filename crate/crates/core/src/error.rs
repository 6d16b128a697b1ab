use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum GlossError {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty sentence after tokenization")]
    EmptySentence,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: usize, vocab_size: usize },

    #[error("position {position} out of range (max length {max_len})")]
    PositionOutOfRange { position: usize, max_len: usize },

    #[error("generation requires positional model")]
    NotPositional,

    #[error("{0}")]
    Degenerate(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic/version")]
    BadHeader,

    #[error("unexpected end of file")]
    UnexpectedEof,

    #[error("invalid model file: {0}")]
    InvalidModel(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl GlossError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GlossError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, GlossError>;
