use thiserror::Error;

/// Errors surfaced by the engine's public operations.
#[derive(Debug, Error)]
pub enum WclError {
    #[error("row {row} has L2 norm below 1e-12; embedding is degenerate")]
    ZeroRow { row: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("empty input")]
    EmptyInput,
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("input too small: need at least {min} rows, got {got}")]
    TooSmall { min: usize, got: usize },
    #[error("temperature must be positive, got {0}")]
    NonPositiveTau(f64),
    #[error("index {index} out of range for capacity {capacity}")]
    IndexOutOfRange { index: usize, capacity: usize },
    #[error("feature store incomplete: sample {missing} never recorded")]
    IncompleteStore { missing: usize },
    #[error("k={k} too large for dataset of size {size}")]
    KTooLarge { k: usize, size: usize },
    #[error("KNN table required past warm-up (epoch {epoch} >= warmup {warmup}) but absent")]
    MissingKnnTable { epoch: usize, warmup: usize },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParams { name: String, reason: String },
    #[error("degenerate split: train split contains fewer than 2 classes")]
    DegenerateSplit,
    #[error("config error: {0}")]
    Config(String),
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl WclError {
    pub fn invalid(name: &str, reason: impl Into<String>) -> Self {
        WclError::InvalidParams {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
