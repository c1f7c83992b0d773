use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite loss in batch {batch} (sample {sample})")]
    NonFiniteLoss { batch: usize, sample: usize },

    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("empty data: {0}")]
    EmptyData(&'static str),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("value out of range: {name} = {value} (allowed {allowed})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        allowed: &'static str,
    },

    #[error("inverted interval: lo {lo} > hi {hi} beyond tolerance {tolerance}")]
    InvertedInterval { lo: f64, hi: f64, tolerance: f64 },

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("{path}: line {line}, column {column}: {reason}")]
    Parse {
        path: PathBuf,
        line: u64,
        column: String,
        reason: String,
    },

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }
}
