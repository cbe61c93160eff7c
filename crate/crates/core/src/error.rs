use thiserror::Error;

/// Errors produced by the point-set pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("row {0} has zero norm and cannot be normalized")]
    ZeroNormRow(usize),

    #[error("layer {layer}, row {row} has zero norm")]
    ZeroNormLayerRow { layer: usize, row: usize },

    #[error("at least two points are required, got {0}")]
    TooFewPoints(usize),

    #[error("dimension {d} is too small for {n} simplex vertices (need d >= n - 1)")]
    DimensionTooSmall { n: usize, d: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("value outside its domain: {0}")]
    DomainError(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("loss became non-finite at iteration {iteration}")]
    NonFiniteLoss {
        iteration: usize,
        /// Loss samples recorded before the failure.
        loss_trace: Vec<(usize, f64)>,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    ParseError {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("ragged rows: line {line} has {found} values, expected {expected}")]
    RaggedRows {
        line: u64,
        expected: usize,
        found: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
