//! Null handling, session-level splitting, scaling and class balancing.

mod nulls;
mod oversample;
mod scaler;
mod split;

pub use nulls::{drop_nulls, NullReport};
pub use oversample::{balance_indices, oversample_balance, oversample_dataset};
pub use scaler::{apply_scaler, fit_scaler, ColumnTransform, Dataset, Scaler};
pub use split::{session_split, session_split_matrix, Side, SplitAssignment};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("every one of {0} rows contained a missing value")]
    AllRowsDropped(usize),
    #[error("train fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("device {label:?} has {count} session(s); at least 2 are needed to split")]
    InsufficientSessions { label: String, count: usize },
    #[error("scaler used before it was fitted")]
    NotFitted,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("class {0:?} has no rows")]
    EmptyClass(String),
    #[error("split file line {line}: {reason}")]
    SplitFormat { line: usize, reason: String },
}
