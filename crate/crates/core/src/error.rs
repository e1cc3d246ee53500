use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("input too short: sequence length {len} is smaller than kernel size {kernel}")]
    InputTooShort { len: usize, kernel: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite gradient in parameter `{name}` at element {index} (value {value}) after {step} steps")]
    NonFiniteGradient {
        name: String,
        index: usize,
        value: f64,
        step: u64,
    },

    #[error("non-finite loss ({0})")]
    NonFiniteLoss(String),

    #[error("token {0:?} is empty after normalization")]
    EmptyToken(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("unseen n-gram context {0:?}")]
    UnseenContext(String),

    #[error("empty input")]
    EmptyInput,

    #[error("model artifact: {0}")]
    Artifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
