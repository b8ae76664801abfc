use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("thread {thread_id}: {message} (tweet {tweet_id})")]
    InvalidThread {
        thread_id: String,
        tweet_id: u64,
        message: String,
    },

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("no embedding for text key {key:#018x} (node {node:?})")]
    MissingEmbedding { key: u64, node: Option<usize> },

    #[error("embedding width {found} does not match provider width {expected}")]
    EmbeddingWidth { expected: usize, found: usize },

    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("backward already ran on this tape; reset it first")]
    BackwardTwice,

    #[error("loss node must be 1x1, got {0:?}")]
    NonScalarLoss((usize, usize)),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.to_string(),
        }
    }
}
