use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (jitter ladder exhausted at {max_jitter:e})")]
    NotPositiveDefinite { max_jitter: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("grid is not uniform: relative spacing deviation {deviation:e}")]
    NonUniformGrid { deviation: f64 },
    #[error("function evaluated to a non-finite value at coordinate {index}")]
    NonFiniteEvaluation { index: usize },
    #[error("channel {channel} out of range 1..={channels}")]
    ChannelOutOfRange { channel: usize, channels: usize },
    #[error("unsupported input dimension {p} for this kernel family")]
    UnsupportedDimension { p: usize },
    #[error("invalid kernel parameters: {0}")]
    InvalidParams(String),
    #[error("too few points: need at least {need}, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("file contains no data rows")]
    EmptyFile,
    #[error("every optimizer restart failed with a non-finite objective")]
    AllRestartsFailed,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
