//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by kernel evaluation, operator construction, training,
/// data generation and ingestion.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates a documented precondition (dimension mismatch,
    /// out-of-range index, nonpositive value where positivity is required).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The request is well-formed but outside the supported feature set
    /// (derivative order too high, unsupported atomic-term pairing).
    #[error("unsupported: {0}")]
    Capability(String),

    /// The model configuration is inconsistent (missing parameter slot,
    /// transform table not covering a trainable parameter).
    #[error("configuration error: {0}")]
    Configuration(String),

    /// A numerical procedure failed to converge or produced non-finite values.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Every optimizer restart failed; carries per-restart diagnostics.
    #[error("training failed: {message}")]
    Training {
        message: String,
        diagnostics: Vec<String>,
    },

    /// Operator expression text could not be parsed.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// A data file is malformed; `row` is 1-based and counts the header.
    #[error("data format error{}: {message}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    DataFormat { row: Option<usize>, message: String },

    /// Ingestion succeeded syntactically but yielded no usable observations.
    #[error("{0}")]
    NoUsableData(String),

    /// Synthetic data generation failed an internal consistency check.
    #[error("data generation error: {0}")]
    DataGeneration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
