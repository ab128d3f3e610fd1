use super::sweep::{check_ascending, ExperimentConfig};
use super::ExperimentError;
use crate::features::FeatureMatrix;
use crate::model::mean_binary_accuracy;
use crate::pipeline::{fit_model, prepare};
use crate::preprocess::session_split;
use crate::scalar::Scalar;
use crate::seed;
use crate::Result;
use rand::seq::SliceRandom;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub fraction: f64,
    pub n_train_sessions: usize,
    pub n_train_rows: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

/// Trains on nested session subsets of the training split. Each device's
/// training sessions are shuffled once and every fraction takes a prefix of
/// `ceil(fraction * n)` of them, so smaller subsets are contained in larger
/// ones. The test split is the same for every fraction.
pub fn learning_curve<T: Scalar>(
    matrix: &FeatureMatrix<T>,
    fractions: &[f64],
    cfg: &ExperimentConfig,
    window_s: Option<f64>,
) -> Result<Vec<CurvePoint>> {
    if !check_ascending(fractions, 0.0, 1.0) {
        return Err(ExperimentError::InvalidFractions(fractions.to_vec()).into());
    }
    let split = session_split(&matrix.session_labels(), cfg.train_fraction, cfg.seed)?;
    let mut by_label: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (sid, label) in matrix.session_labels() {
        if split.train.contains(&sid) {
            by_label.entry(label).or_default().push(sid);
        }
    }
    for (label, sids) in by_label.iter_mut() {
        sids.sort();
        sids.dedup();
        sids.shuffle(&mut seed::rng(seed::derive_str(cfg.seed, &format!("curve:{label}"))));
    }
    let test = matrix.rows_of_sessions(&split.test);
    let mut out = Vec::with_capacity(fractions.len());
    for &f in fractions {
        let subset: BTreeSet<String> = by_label
            .values()
            .flat_map(|sids| {
                let k = ((f * sids.len() as f64).ceil() as usize).clamp(1, sids.len());
                sids[..k].iter().cloned()
            })
            .collect();
        let train = matrix.rows_of_sessions(&subset);
        let (model, _) = fit_model(&train, &cfg.model_params(), &cfg.prune, window_s)?;
        let train_ds = prepare(&model, &train)?;
        let test_ds = prepare(&model, &test)?;
        out.push(CurvePoint {
            fraction: f,
            n_train_sessions: subset.len(),
            n_train_rows: train_ds.n_rows(),
            train_accuracy: mean_binary_accuracy(&model, &train_ds)?,
            test_accuracy: mean_binary_accuracy(&model, &test_ds)?,
        });
        log::info!("learning curve fraction {f} done");
    }
    Ok(out)
}
