use super::metrics::{evaluate, EvalMode, Evaluation};
use super::ExperimentError;
use crate::features::FeatureMatrix;
use crate::flow::Session;
use crate::model::HyperParams;
use crate::pipeline::{build_matrix, fit_model, prepare, FeatureSource};
use crate::preprocess::{oversample_dataset, session_split, PreprocessError, SplitAssignment};
use crate::pruning::{PruneConfig, PruneReport};
use crate::scalar::Scalar;
use crate::seed;
use crate::{Error, Result};
use rayon::prelude::*;

/// Observation windows swept when none are configured, in seconds.
pub const DEFAULT_WINDOWS: [f64; 8] = [10.0, 20.0, 30.0, 45.0, 60.0, 75.0, 90.0, 105.0];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// `params.seed` is replaced by `seed`.
    pub params: HyperParams,
    pub train_fraction: f64,
    pub seed: u64,
    pub prune: PruneConfig,
    /// Fusion threshold below which a row is reported as unknown.
    pub theta: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            params: HyperParams::default(),
            train_fraction: 0.8,
            seed: 0,
            prune: PruneConfig::default(),
            theta: None,
        }
    }
}

impl ExperimentConfig {
    pub fn model_params(&self) -> HyperParams {
        self.params.with_seed(self.seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult {
    pub window_s: f64,
    pub unbalanced: Evaluation,
    pub balanced_test: Evaluation,
    pub prune: PruneReport,
    pub n_train_rows: usize,
    pub n_test_rows: usize,
}

impl WindowResult {
    pub fn evaluation(&self, mode: EvalMode) -> &Evaluation {
        match mode {
            EvalMode::Unbalanced => &self.unbalanced,
            EvalMode::BalancedTest => &self.balanced_test,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WindowOutcome {
    Done(Box<WindowResult>),
    /// No usable rows on one side of the split at this window.
    EmptyWindow { window_s: f64 },
}

impl WindowOutcome {
    pub fn window_s(&self) -> f64 {
        match self {
            WindowOutcome::Done(r) => r.window_s,
            WindowOutcome::EmptyWindow { window_s } => *window_s,
        }
    }

    pub fn result(&self) -> Option<&WindowResult> {
        match self {
            WindowOutcome::Done(r) => Some(r),
            WindowOutcome::EmptyWindow { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub split: SplitAssignment,
    pub windows: Vec<WindowOutcome>,
}

/// Train on the split's training sessions and evaluate on its test
/// sessions, in both evaluation modes. `None` when either side has no
/// usable rows.
pub fn run_split<T: Scalar>(
    matrix: &FeatureMatrix<T>,
    split: &SplitAssignment,
    cfg: &ExperimentConfig,
    window_s: f64,
) -> Result<Option<WindowResult>> {
    let train = matrix.rows_of_sessions(&split.train);
    let test = matrix.rows_of_sessions(&split.test);
    if train.is_empty() || test.is_empty() {
        return Ok(None);
    }
    let (model, nulls) = match fit_model(&train, &cfg.model_params(), &cfg.prune, Some(window_s)) {
        Err(Error::Preprocess(PreprocessError::AllRowsDropped(_))) => return Ok(None),
        r => r?,
    };
    if nulls.dropped_rows > 0 {
        log::info!("window {window_s}s: dropped {} training rows with missing values", nulls.dropped_rows);
    }
    let test_ds = match prepare(&model, &test) {
        Err(Error::Preprocess(PreprocessError::AllRowsDropped(_))) => return Ok(None),
        r => r?,
    };
    let theta = cfg.theta.map(T::from_f64_lossy);
    let unbalanced = evaluate(&model, &test_ds, theta, EvalMode::Unbalanced)?;
    let balanced = oversample_dataset(&test_ds, seed::derive_str(cfg.seed, "test-oversample"))?;
    let balanced_test = evaluate(&model, &balanced, theta, EvalMode::BalancedTest)?;
    Ok(Some(WindowResult {
        window_s,
        unbalanced,
        balanced_test,
        prune: model.prune.clone(),
        n_train_rows: model.meta.n_train_rows,
        n_test_rows: test_ds.n_rows(),
    }))
}

pub(crate) fn check_ascending(xs: &[f64], lo_exclusive: f64, hi_inclusive: f64) -> bool {
    !xs.is_empty()
        && xs.iter().all(|&x| x > lo_exclusive && x <= hi_inclusive)
        && xs.windows(2).all(|w| w[0] < w[1])
}

/// One fixed session split, then a full train/evaluate run per window.
pub fn window_sweep<T: Scalar>(
    sessions: &[Session],
    windows: &[f64],
    cfg: &ExperimentConfig,
    source: &dyn FeatureSource<T>,
) -> Result<SweepResult> {
    if !check_ascending(windows, 0.0, f64::INFINITY) {
        return Err(ExperimentError::InvalidWindows(windows.to_vec()).into());
    }
    let pairs: Vec<(String, String)> = sessions
        .iter()
        .map(|s| (s.session_id.clone(), s.device_label.clone()))
        .collect();
    let split = session_split(&pairs, cfg.train_fraction, cfg.seed)?;
    let outcomes = windows
        .par_iter()
        .map(|&w| {
            let m = build_matrix(sessions, Some(w), source)?;
            let r = run_split(&m, &split, cfg, w)?;
            log::info!("window {w}s done");
            Ok(match r {
                Some(r) => WindowOutcome::Done(Box::new(r)),
                None => WindowOutcome::EmptyWindow { window_s: w },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { split, windows: outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{learning_curve, parse_per_device_tsv, parse_sweep_tsv, per_device_tsv, summaries_from_per_device, sweep_tsv};
    use crate::pipeline::{load_sessions, Direct};
    use crate::synth::{builtin_profiles, generate_corpus};

    fn corpus(devices: usize, per_device: usize) -> Vec<Session> {
        let dir = tempfile::tempdir().unwrap();
        generate_corpus(&builtin_profiles(devices), per_device, 7, dir.path()).unwrap();
        load_sessions(&dir.path().join("manifest.tsv")).unwrap()
    }

    fn cfg() -> ExperimentConfig {
        ExperimentConfig {
            params: HyperParams { n_trees: 10, ..HyperParams::default() },
            seed: 3,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn sweep_is_deterministic_and_reports_round_trip() {
        let sessions = corpus(4, 5);
        let a = window_sweep::<f64>(&sessions, &[10.0, 30.0], &cfg(), &Direct).unwrap();
        let b = window_sweep::<f64>(&sessions, &[10.0, 30.0], &cfg(), &Direct).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.windows.len(), 2);
        assert!(a.split.is_disjoint());
        let r = a.windows[1].result().unwrap();
        assert_eq!(r.unbalanced.per_device.len(), 4);
        assert!(r.unbalanced.summary.mean > 0.9, "{}", r.unbalanced.summary.mean);

        let rows = parse_sweep_tsv(&sweep_tsv(&a.rows())).unwrap();
        assert_eq!(rows, a.rows());
        let per = parse_per_device_tsv(&per_device_tsv(&a)).unwrap();
        let sums = summaries_from_per_device(&per, EvalMode::Unbalanced);
        for ((w, s), row) in sums.iter().zip(&rows) {
            let t = row.stats.as_ref().unwrap();
            assert_eq!(*w, row.window_s);
            assert_eq!(s.mean, t.mean);
            assert_eq!(s.std, t.std);
        }
    }

    #[test]
    fn sweep_of_one_window_equals_run_split() {
        let sessions = corpus(3, 4);
        let c = cfg();
        let s = window_sweep::<f64>(&sessions, &[30.0], &c, &Direct).unwrap();
        let m = build_matrix::<f64>(&sessions, Some(30.0), &Direct).unwrap();
        let r = run_split(&m, &s.split, &c, 30.0).unwrap().unwrap();
        assert_eq!(s.windows[0].result().unwrap(), &r);
    }

    #[test]
    fn tiny_window_is_empty_and_bad_windows_rejected() {
        let sessions = corpus(2, 3);
        let s = window_sweep::<f64>(&sessions, &[0.01, 30.0], &cfg(), &Direct).unwrap();
        assert_eq!(s.windows[0], WindowOutcome::EmptyWindow { window_s: 0.01 });
        assert!(s.windows[1].result().is_some());
        for bad in [vec![], vec![30.0, 10.0], vec![0.0, 10.0], vec![10.0, 10.0]] {
            assert!(matches!(
                window_sweep::<f64>(&sessions, &bad, &cfg(), &Direct),
                Err(Error::Experiment(ExperimentError::InvalidWindows(_)))
            ));
        }
    }

    #[test]
    fn evaluating_on_training_sessions_is_leakage() {
        let sessions = corpus(2, 3);
        let m = build_matrix::<f64>(&sessions, Some(30.0), &Direct).unwrap();
        let (model, _) = fit_model(&m, &cfg().model_params(), &PruneConfig::default(), Some(30.0)).unwrap();
        let ds = prepare(&model, &m).unwrap();
        match evaluate(&model, &ds, None, EvalMode::Unbalanced) {
            Err(Error::Experiment(ExperimentError::LeakageDetected(s))) => assert_eq!(s.len(), 6),
            other => panic!("expected leakage, got {other:?}"),
        }
    }

    #[test]
    fn learning_curve_grows_nested_subsets() {
        let sessions = corpus(3, 6);
        let m = build_matrix::<f64>(&sessions, Some(30.0), &Direct).unwrap();
        let pts = learning_curve(&m, &[0.25, 0.5, 1.0], &cfg(), Some(30.0)).unwrap();
        assert_eq!(pts.len(), 3);
        assert!(pts.windows(2).all(|w| w[0].n_train_sessions <= w[1].n_train_sessions));
        assert!(pts.windows(2).all(|w| w[0].n_train_rows <= w[1].n_train_rows));
        assert!(pts.iter().all(|p| p.train_accuracy >= p.test_accuracy - 0.2));
        assert!(learning_curve(&m, &[0.5, 0.25], &cfg(), Some(30.0)).is_err());
        assert!(learning_curve(&m, &[1.5], &cfg(), Some(30.0)).is_err());
    }
}
