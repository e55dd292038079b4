use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, received {received}")]
    Shape {
        context: &'static str,
        expected: String,
        received: String,
    },

    #[error("invalid architecture: {0}")]
    InvalidArch(String),

    #[error("architecture mismatch: {0}")]
    ArchMismatch(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("model pool has no {0} entry with pool role")]
    MissingRelation(&'static str),

    #[error("cosine similarity of a zero-norm vector")]
    ZeroNorm,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("unsupported format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: impl ToString, received: impl ToString) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            received: received.to_string(),
        }
    }
}
