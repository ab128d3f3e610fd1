//! CART trees, bootstrap random forests, the one-vs-rest device ensemble and
//! randomized hyperparameter search.

mod artifact;
mod forest;
mod ovr;
mod params;
mod search;
mod tree;

pub use artifact::{FORMAT_VERSION, MAGIC};
pub use forest::{train_forest, train_forest_on, RandomForest};
pub use ovr::{mean_binary_accuracy, train_ovr, OvRModel, Prediction, TrainingMeta};
pub use params::{HyperParams, MaxFeatures};
pub use search::{randomized_search_cv, session_folds, Candidate, CvReport, SearchSpace};
pub use tree::{gini, train_tree, DecisionTree, Node, TrainSet};

use crate::codec::DecodeError;
use crate::preprocess::PreprocessError;
use crate::pruning::PruneError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no training rows")]
    EmptyData,
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("row has {got} features, model expects {expected}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("training needs at least two classes, found {0}")]
    SingleClass(usize),
    #[error("device {0:?} is not part of the model")]
    UnknownDevice(String),
    #[error("device {0:?} already has a forest")]
    DuplicateDevice(String),
    #[error("hyperparameter search space is empty")]
    EmptySpace,
    #[error("cross-validation needs k >= 2 folds and at least k sessions, got k={k} with {sessions} sessions")]
    InvalidFolds { k: usize, sessions: usize },
    #[error("model artifact: {0}")]
    Artifact(String),
    #[error("model artifact: {0}")]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Prune(#[from] PruneError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
