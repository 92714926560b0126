use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: input extent {len} is shorter than kernel width {kernel}")]
    InputTooShort {
        op: &'static str,
        len: usize,
        kernel: usize,
    },

    #[error("max_pool_rows: window width {width} exceeds {cols} columns")]
    EmptyOutput { width: usize, cols: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("attention over a fully masked sequence")]
    DegenerateAttention,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("instance {id}: contextual vectors missing for stream `{stream}`")]
    MissingContextual { id: String, stream: String },

    #[error("{path}:{line}: {msg}")]
    Format {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("record {index}: {msg}")]
    Record { index: usize, msg: String },

    #[error("record {index}: validation failed: {msg}")]
    Validation { index: usize, msg: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Dimension {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }
}
