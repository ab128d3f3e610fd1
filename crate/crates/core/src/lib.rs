//! Early-window IoT device identification from passive flow features.
//!
//! The pipeline runs capture parsing and flow assembly ([`flow`]), per-flow
//! feature extraction ([`features`]), filter-style feature validation
//! ([`pruning`]), leakage-free preprocessing ([`preprocess`]), one-vs-rest
//! random forests ([`model`]) and the evaluation drivers in
//! [`experiments`]. [`cache`] persists per-window feature files and session
//! metadata; [`synth`] generates labelled startup captures.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! at the crate root fix the scalar to `f64`.

pub mod cache;
pub mod codec;
pub mod experiments;
pub mod features;
pub mod flow;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod pruning;
pub mod scalar;
pub mod seed;
pub mod synth;

pub use scalar::Scalar;

pub type FeatureVector = features::FeatureVector<f64>;
pub type FeatureValue = features::FeatureValue<f64>;
pub type FeatureMatrix = features::FeatureMatrix<f64>;
pub type Scaler = preprocess::Scaler<f64>;
pub type Dataset = preprocess::Dataset<f64>;
pub type DecisionTree = model::DecisionTree<f64>;
pub type RandomForest = model::RandomForest<f64>;
pub type OvRModel = model::OvRModel<f64>;

use thiserror::Error;

/// Any pipeline failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Flow(#[from] flow::FlowError),
    #[error(transparent)]
    Feature(#[from] features::FeatureError),
    #[error(transparent)]
    Prune(#[from] pruning::PruneError),
    #[error(transparent)]
    Preprocess(#[from] preprocess::PreprocessError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Experiment(#[from] experiments::ExperimentError),
    #[error(transparent)]
    Cache(#[from] cache::CacheError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
