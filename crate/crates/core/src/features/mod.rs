//! Flow-level feature catalogue and extraction.

mod entropy;
mod extract;
mod matrix;
mod ports;
mod schema;

pub use entropy::{nonzero_fraction, payload_entropy, EmptyInput};
pub use extract::{extract_features, extract_session};
pub use matrix::FeatureMatrix;
pub use ports::{is_internal_dst, port_bucket, PortBucket};
pub use schema::{canonical_rank, Column, FeatureKind, FeatureSchema, CATALOGUE, SCHEMA_VERSION};

use crate::scalar::Scalar;
use thiserror::Error;

/// Payload bytes per flow direction that feed the entropy statistics.
pub const PAYLOAD_CAP: usize = 512;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("cannot extract features from an empty flow")]
    EmptyFlow,
    #[error("row has {got} values, schema has {expected}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("unknown feature column {0:?}")]
    UnknownColumn(String),
}

/// One cell of a feature vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureValue<T> {
    Num(T),
    /// An undefined statistic (e.g. std of one sample).
    Missing,
    Cat(u16),
    Bin(bool),
}

impl<T: Scalar> FeatureValue<T> {
    /// Value as a number; categorical codes and binaries map to their codes.
    pub fn as_scalar(&self) -> Option<T> {
        match *self {
            FeatureValue::Num(v) => Some(v),
            FeatureValue::Missing => None,
            FeatureValue::Cat(c) => Some(T::from_count(usize::from(c))),
            FeatureValue::Bin(b) => Some(if b { T::one() } else { T::zero() }),
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, FeatureValue::Missing)
    }

    /// Missing-aware constructor: non-finite results become `Missing`.
    pub fn num(v: f64) -> Self {
        if v.is_finite() {
            FeatureValue::Num(T::from_f64_lossy(v))
        } else {
            FeatureValue::Missing
        }
    }

    pub fn opt(v: Option<f64>) -> Self {
        v.map_or(FeatureValue::Missing, Self::num)
    }
}

/// Where a feature vector came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub session_id: String,
    pub flow_index: u32,
    /// Observation window in seconds; `None` for an untruncated session.
    pub window: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    pub values: Vec<FeatureValue<T>>,
    pub provenance: Provenance,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn get(&self, schema: &FeatureSchema, name: &str) -> Option<FeatureValue<T>> {
        schema.index_of(name).map(|i| self.values[i])
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(FeatureValue::is_missing)
    }
}
