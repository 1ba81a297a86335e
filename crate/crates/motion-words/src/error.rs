//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("sequence '{id}' too short: {len} frames, patch length is {patch_len}")]
    SequenceTooShort {
        id: String,
        len: usize,
        patch_len: usize,
    },

    #[error("degenerate pose in '{id}': mean pairwise joint distance is zero")]
    DegeneratePose { id: String },

    #[error("config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("empty token sequence: '{id}'")]
    EmptySequence { id: String },

    #[error("token {word} in '{id}' exceeds vocabulary size {vocab}")]
    VocabularyOverflow {
        id: String,
        word: u32,
        vocab: usize,
    },

    #[error("duplicate sequence id: '{0}'")]
    DuplicateId(String),

    #[error("{dead} dead codes to revive but the reservoir is empty")]
    RevivalStarved { dead: usize },

    #[error("insufficient data: need at least {needed} items, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("autocorrelation undefined: sequence has zero variance")]
    UndefinedVariance,

    #[error("evaluation protocol yields zero usable queries")]
    EmptyProtocol,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable kind, used by the CLI diagnostic stream.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::SequenceTooShort { .. } => "sequence-too-short",
            Error::DegeneratePose { .. } => "degenerate-pose",
            Error::ConfigMismatch(_) => "config-mismatch",
            Error::EmptySequence { .. } => "empty-sequence",
            Error::VocabularyOverflow { .. } => "vocabulary-overflow",
            Error::DuplicateId(_) => "duplicate-id",
            Error::RevivalStarved { .. } => "revival-starved",
            Error::InsufficientData { .. } => "insufficient-data",
            Error::UndefinedVariance => "undefined-variance",
            Error::EmptyProtocol => "empty-protocol",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code the CLI maps this error to: 2 for I/O, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 2,
            _ => 1,
        }
    }
}
