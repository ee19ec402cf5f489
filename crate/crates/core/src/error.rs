use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// Variants are grouped by the kind of contract that was broken, so callers
/// (and the command-line front end) can report a stable category.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("index error in {op}: index {index} out of range for {bound}")]
    Index {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("domain error in {op}: {message}")]
    Domain { op: &'static str, message: String },
    #[error("contract error: {0}")]
    Contract(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("batching error: {0}")]
    Batching(String),
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error("metric undefined: {0}")]
    MetricUndefined(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("head mismatch: {0}")]
    HeadMismatch(String),
    #[error("invalid config: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape",
            Error::Index { .. } => "index",
            Error::Domain { .. } => "domain",
            Error::Contract(_) => "contract",
            Error::InvalidGraph(_) => "graph",
            Error::Batching(_) => "batching",
            Error::Sampling(_) => "sampling",
            Error::MetricUndefined(_) => "metric",
            Error::Degenerate(_) => "degenerate",
            Error::HeadMismatch(_) => "head",
            Error::Config(_) => "config",
            Error::Checkpoint(_) => "checkpoint",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
