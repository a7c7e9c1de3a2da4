use thiserror::Error;

/// Errors raised by the simulation core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("dimension mismatch: expected {expected} inputs, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("row {row} out of range for a crossbar with {rows} rows")]
    RowOutOfRange { row: usize, rows: usize },

    #[error("crossbar dimensions must be non-zero (rows = {rows}, cols = {cols})")]
    ZeroDimension { rows: usize, cols: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
