use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("empty input text")]
    EmptyText,
    #[error("vocabulary max_size must be at least {min}, got {got}")]
    VocabTooSmall { min: usize, got: usize },
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenOutOfRange { id: usize, size: usize },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("mix ratio {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error(
        "non-finite loss at step {step} (alphas {alphas:?}, max |h| {max_abs_hidden})"
    )]
    NonFiniteLoss {
        step: u64,
        alphas: Vec<f64>,
        max_abs_hidden: f64,
    },
    #[error("non-finite classifier loss at epoch {epoch}")]
    NonFiniteClassifierLoss { epoch: usize },
    #[error("empty hypothesis")]
    EmptyHypothesis,
    #[error("empty input list")]
    EmptyInput,
    #[error("item {index}: {source}")]
    Item {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("vocabulary mismatch: expected hash {expected}, found {found}")]
    VocabMismatch { expected: String, found: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("class {class} has {available} examples, {needed} needed for k-shot sampling")]
    InsufficientExamples {
        class: usize,
        available: usize,
        needed: usize,
    },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
