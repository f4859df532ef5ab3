use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate neuron: {0}")]
    DegenerateNeuron(String),

    #[error("feature {0} has no samples")]
    MissingFeature(usize),

    #[error("feature {0} covers every sample, complement is empty")]
    EmptyComplement(usize),

    #[error("only {valid} valid neurons, need at least {needed}")]
    InsufficientValidNeurons { valid: usize, needed: usize },

    #[error("threshold still warming up ({remaining} batches left)")]
    WarmupIncomplete { remaining: usize },

    #[error("no entries selected, false killing rate undefined")]
    UndefinedFkr,

    #[error("training diverged at step {step}: non-finite loss")]
    TrainingDiverged { step: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated record {record}: expected {expected} bytes, found {found}")]
    Truncation {
        record: u64,
        expected: usize,
        found: usize,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::DegenerateNeuron(_) => "degenerate-neuron",
            Error::MissingFeature(_) => "missing-feature",
            Error::EmptyComplement(_) => "empty-complement",
            Error::InsufficientValidNeurons { .. } => "insufficient-valid-neurons",
            Error::WarmupIncomplete { .. } => "warmup-incomplete",
            Error::UndefinedFkr => "undefined-fkr",
            Error::TrainingDiverged { .. } => "training-diverged",
            Error::Format(_) => "format-error",
            Error::Truncation { .. } => "truncation-error",
            Error::Validation(_) => "validation-error",
            Error::Io(_) => "io-error",
            Error::Json(_) => "config-error",
            Error::Csv(_) => "io-error",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
