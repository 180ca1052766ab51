use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("component index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("non-finite gradient entry from component {component}")]
    NonFiniteGradient { component: usize },

    #[error("non-finite value in parameter vector at coordinate {coordinate}")]
    NonFiniteParameter { coordinate: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("row {row}: label {label} is not a binary class label")]
    BadLabel { row: usize, label: f64 },

    #[error("label is not one-hot: {0}")]
    NotOneHot(String),

    #[error("empty trace")]
    EmptyTrace,

    #[error("enumeration too large: {0}")]
    EnumerationTooLarge(String),

    #[error("missing smoothness constant for this problem")]
    MissingSmoothness,

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
