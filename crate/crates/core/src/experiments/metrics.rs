use super::ExperimentError;
use crate::model::OvRModel;
use crate::preprocess::Dataset;
use crate::scalar::Scalar;
use crate::Result;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

/// One-vs-rest confusion counts and the scores derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceMetrics {
    pub device: String,
    pub accuracy: f64,
    /// 1.0 when nothing was predicted positive.
    pub precision: f64,
    /// 1.0 when the device has no test rows.
    pub recall: f64,
    /// 0.0 when precision + recall = 0.
    pub f1: f64,
    /// Test rows of this device.
    pub support: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

pub fn binary_metrics(device: &str, predicted: &[bool], actual: &[bool]) -> DeviceMetrics {
    assert_eq!(predicted.len(), actual.len());
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p, a) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    DeviceMetrics {
        device: device.to_string(),
        accuracy: ratio(tp + tn, predicted.len()),
        precision,
        recall,
        f1,
        support: tp + fn_,
        tp,
        fp,
        fn_,
        tn,
    }
}

/// Accuracy statistics across devices; `std` is the population deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Devices with accuracy exactly 1.
    pub perfect: usize,
    pub n_devices: usize,
}

pub fn summarize(metrics: &[DeviceMetrics]) -> Summary {
    let acc: Vec<f64> = metrics.iter().map(|m| m.accuracy).collect();
    let n = acc.len().max(1) as f64;
    let mean = acc.iter().sum::<f64>() / n;
    Summary {
        mean,
        std: (acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt(),
        min: acc.iter().copied().fold(f64::INFINITY, f64::min),
        max: acc.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        perfect: acc.iter().filter(|&&a| a == 1.0).count(),
        n_devices: acc.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EvalMode {
    /// Test rows as observed.
    Unbalanced,
    /// Test rows randomly oversampled to equal counts per device.
    BalancedTest,
}

impl EvalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalMode::Unbalanced => "unbalanced",
            EvalMode::BalancedTest => "oversampled_test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "unbalanced" => Some(EvalMode::Unbalanced),
            "oversampled_test" => Some(EvalMode::BalancedTest),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub mode: EvalMode,
    pub per_device: Vec<DeviceMetrics>,
    pub summary: Summary,
    /// Fraction of rows whose fused prediction equals the true label.
    pub multiclass_accuracy: f64,
    /// `(true label, fused prediction)` per test row.
    pub predictions: Vec<(String, String)>,
}

/// Scores `test` per device (positive iff p > 0.5) and through fusion.
/// Any test session that the model was trained on is an error.
pub fn evaluate<T: Scalar>(model: &OvRModel<T>, test: &Dataset<T>, theta: Option<T>, mode: EvalMode) -> Result<Evaluation> {
    let trained: BTreeSet<&str> = model.meta.train_sessions.iter().map(String::as_str).collect();
    let leaked: BTreeSet<&str> = test
        .session_ids
        .iter()
        .map(String::as_str)
        .filter(|s| trained.contains(s))
        .collect();
    if !leaked.is_empty() {
        return Err(ExperimentError::LeakageDetected(leaked.into_iter().map(String::from).collect()).into());
    }
    let half = T::from_f64_lossy(0.5);
    let mut scores: Vec<Vec<(&str, T)>> = Vec::with_capacity(test.n_rows());
    for row in test.rows() {
        scores.push(model.scores(row)?);
    }
    let per_device: Vec<DeviceMetrics> = model
        .devices()
        .enumerate()
        .map(|(d, name)| {
            let predicted: Vec<bool> = scores.iter().map(|s| s[d].1 > half).collect();
            let actual: Vec<bool> = test.labels.iter().map(|l| l == name).collect();
            binary_metrics(name, &predicted, &actual)
        })
        .collect();
    let predictions: Vec<(String, String)> = scores
        .iter()
        .zip(&test.labels)
        .map(|(s, l)| (l.clone(), OvRModel::fuse(s, theta).label().to_string()))
        .collect();
    let hits = predictions.iter().filter(|(a, b)| a == b).count();
    Ok(Evaluation {
        mode,
        summary: summarize(&per_device),
        per_device,
        multiclass_accuracy: if predictions.is_empty() { 0.0 } else { hits as f64 / predictions.len() as f64 },
        predictions,
    })
}

/// Misclassification counts per unordered device pair, most confused first.
pub fn pairwise_confusions(eval: &Evaluation) -> Vec<(String, String, usize)> {
    let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (t, p) in &eval.predictions {
        if t != p {
            let key = if t < p { (t.clone(), p.clone()) } else { (p.clone(), t.clone()) };
            *counts.entry(key).or_default() += 1;
        }
    }
    let mut out: Vec<(String, String, usize)> = counts.into_iter().map(|((a, b), n)| (a, b, n)).collect();
    out.sort_by(|x, y| y.2.cmp(&x.2).then_with(|| (&x.0, &x.1).cmp(&(&y.0, &y.1))));
    out
}

/// False-positive and false-negative tallies across device classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorAnalysis {
    pub n_devices: usize,
    pub fp_min: usize,
    pub fp_max: usize,
    pub fp_mean: f64,
    pub fn_min: usize,
    pub fn_max: usize,
    pub fn_mean: f64,
    /// Devices with no false positives and no false negatives.
    pub zero_error: usize,
}

impl ErrorAnalysis {
    pub fn from_metrics(metrics: &[DeviceMetrics]) -> Result<Self, ExperimentError> {
        if metrics.is_empty() {
            return Err(ExperimentError::NoDevices);
        }
        let n = metrics.len();
        let fps = metrics.iter().map(|m| m.fp);
        let fns = metrics.iter().map(|m| m.fn_);
        Ok(Self {
            n_devices: n,
            fp_min: fps.clone().min().unwrap_or(0),
            fp_max: fps.clone().max().unwrap_or(0),
            fp_mean: fps.sum::<usize>() as f64 / n as f64,
            fn_min: fns.clone().min().unwrap_or(0),
            fn_max: fns.clone().max().unwrap_or(0),
            fn_mean: fns.sum::<usize>() as f64 / n as f64,
            zero_error: metrics.iter().filter(|m| m.fp == 0 && m.fn_ == 0).count(),
        })
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<16}{:>8}{:>8}{:>10}", "metric", "min", "max", "mean");
        let _ = writeln!(s, "{:<16}{:>8}{:>8}{:>10.2}", "false positives", self.fp_min, self.fp_max, self.fp_mean);
        let _ = writeln!(s, "{:<16}{:>8}{:>8}{:>10.2}", "false negatives", self.fn_min, self.fn_max, self.fn_mean);
        let _ = writeln!(s, "zero-error devices: {}/{}", self.zero_error, self.n_devices);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn perfect_and_inverted_classifiers() {
        let actual = [true, false, true, false, false];
        let m = binary_metrics("a", &actual, &actual);
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1, m.fp, m.fn_), (1.0, 1.0, 1.0, 1.0, 0, 0));
        let inv: Vec<bool> = actual.iter().map(|b| !b).collect();
        let m = binary_metrics("a", &inv, &actual);
        assert_eq!(m.accuracy, 0.0);
        assert_eq!(m.f1, 0.0);
    }

    #[test]
    fn metrics_match_brute_force_counts() {
        let mut rng = crate::seed::rng(4);
        for _ in 0..50 {
            let n = rng.random_range(1..60);
            let p: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let a: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let m = binary_metrics("d", &p, &a);
            let count = |pp: bool, aa: bool| p.iter().zip(&a).filter(|(x, y)| **x == pp && **y == aa).count();
            assert_eq!(m.tp, count(true, true));
            assert_eq!(m.fp, count(true, false));
            assert_eq!(m.fn_, count(false, true));
            assert_eq!(m.tn, count(false, false));
            let correct = p.iter().zip(&a).filter(|(x, y)| x == y).count();
            assert!((m.accuracy - correct as f64 / n as f64).abs() < 1e-15);
            if m.tp + m.fp > 0 && m.tp + m.fn_ > 0 && m.tp > 0 {
                let pr = m.tp as f64 / (m.tp + m.fp) as f64;
                let rc = m.tp as f64 / (m.tp + m.fn_) as f64;
                assert!((m.f1 - 2.0 * pr * rc / (pr + rc)).abs() < 1e-12);
            }
        }
    }

    fn with(device: &str, acc: f64, fp: usize, fn_: usize) -> DeviceMetrics {
        DeviceMetrics {
            device: device.into(),
            accuracy: acc,
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
            support: 10,
            tp: 10,
            fp,
            fn_,
            tn: 10,
        }
    }

    #[test]
    fn summary_recomputes_from_rows() {
        let ms = vec![with("a", 1.0, 0, 0), with("b", 0.9, 1, 2), with("c", 0.8, 17, 0)];
        let s = summarize(&ms);
        assert!((s.mean - 0.9).abs() < 1e-12);
        assert!((s.std - (0.02f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!((s.min, s.max, s.perfect, s.n_devices), (0.8, 1.0, 1, 3));
        let e = ErrorAnalysis::from_metrics(&ms).unwrap();
        assert_eq!((e.fp_min, e.fp_max, e.fn_min, e.fn_max, e.zero_error), (0, 17, 0, 2, 1));
        assert!((e.fp_mean - 6.0).abs() < 1e-12);
        assert!((e.fn_mean - 2.0 / 3.0).abs() < 1e-12);
        assert!(e.render().contains("zero-error devices: 1/3"));
        let perfect = vec![with("a", 1.0, 0, 0), with("b", 1.0, 0, 0)];
        assert_eq!(ErrorAnalysis::from_metrics(&perfect).unwrap().zero_error, 2);
        assert_eq!(ErrorAnalysis::from_metrics(&[]), Err(ExperimentError::NoDevices));
    }

    #[test]
    fn confusions_are_unordered_and_ranked() {
        let preds = [("a", "b"), ("b", "a"), ("c", "a"), ("a", "a")];
        let e = Evaluation {
            mode: EvalMode::Unbalanced,
            per_device: vec![],
            summary: summarize(&[]),
            multiclass_accuracy: 0.25,
            predictions: preds.iter().map(|(x, y)| (x.to_string(), y.to_string())).collect(),
        };
        let c = pairwise_confusions(&e);
        assert_eq!(c[0], ("a".into(), "b".into(), 2));
        assert_eq!(c[1], ("a".into(), "c".into(), 1));
    }
}
