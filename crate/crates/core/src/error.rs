use std::io;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Atoms that cannot be compared at all, e.g. one predicate used with two arities.
    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("vocabulary error: {0}")]
    Vocabulary(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("non-finite loss at epoch {epoch}; learning rate {learning_rate} is probably too high")]
    NonFiniteLoss { epoch: usize, learning_rate: f64 },

    #[error("hash mismatch for {what}: expected {expected}, found {found}")]
    HashMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the error class, used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Parse { .. } | Error::Malformed(_) => 3,
            Error::Config(_) => 2,
            Error::Vocabulary(_) | Error::Encoding(_) | Error::Dimension { .. } => 4,
            Error::Generation(_) => 5,
            Error::NonFiniteLoss { .. } => 6,
            Error::HashMismatch { .. } | Error::MissingArtifact(_) => 7,
            Error::Contract(_) => 8,
            Error::Io(_) | Error::Json(_) => 9,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
