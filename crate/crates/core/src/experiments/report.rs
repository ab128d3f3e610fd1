use super::curve::CurvePoint;
use super::metrics::{pairwise_confusions, summarize, DeviceMetrics, ErrorAnalysis, EvalMode};
use super::sweep::{SweepResult, WindowOutcome};
use super::ExperimentError;
use crate::{Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const SWEEP_FILE: &str = "sweep.tsv";
pub const PER_DEVICE_FILE: &str = "per_device_metrics.tsv";
pub const LEARNING_CURVE_FILE: &str = "learning_curve.tsv";
pub const ERROR_ANALYSIS_FILE: &str = "error_analysis.txt";

const SWEEP_HEADER: &str =
    "window_s\tstatus\tmean_acc\tstd_acc\tmin_acc\tmax_acc\tperfect\tn_devices\tmulticlass_acc\tmean_acc_balanced_test";
const PER_DEVICE_HEADER: &str = "window_s\teval_mode\tdevice\taccuracy\tprecision\trecall\tf1\tsupport\ttp\tfp\tfn\ttn";
const CURVE_HEADER: &str = "fraction\tn_train_sessions\tn_train_rows\ttrain_acc\ttest_acc";

/// One line of `sweep.tsv`; statistics are `None` for an empty window.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub window_s: f64,
    pub stats: Option<SweepStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub perfect: usize,
    pub n_devices: usize,
    pub multiclass: f64,
    pub mean_balanced_test: f64,
}

impl SweepResult {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.windows
            .iter()
            .map(|w| SweepRow {
                window_s: w.window_s(),
                stats: w.result().map(|r| SweepStats {
                    mean: r.unbalanced.summary.mean,
                    std: r.unbalanced.summary.std,
                    min: r.unbalanced.summary.min,
                    max: r.unbalanced.summary.max,
                    perfect: r.unbalanced.summary.perfect,
                    n_devices: r.unbalanced.summary.n_devices,
                    multiclass: r.unbalanced.multiclass_accuracy,
                    mean_balanced_test: r.balanced_test.summary.mean,
                }),
            })
            .collect()
    }
}

// Floats use the shortest round-trip representation so that summaries can be
// recomputed exactly from the per-device file.
pub fn sweep_tsv(rows: &[SweepRow]) -> String {
    let mut s = format!("{SWEEP_HEADER}\n");
    for r in rows {
        match &r.stats {
            Some(t) => {
                let _ = writeln!(
                    s,
                    "{}\tok\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    r.window_s, t.mean, t.std, t.min, t.max, t.perfect, t.n_devices, t.multiclass, t.mean_balanced_test
                );
            }
            None => {
                let _ = writeln!(s, "{}\tempty\tNA\tNA\tNA\tNA\tNA\tNA\tNA\tNA", r.window_s);
            }
        }
    }
    s
}

pub fn per_device_tsv(res: &SweepResult) -> String {
    let mut s = format!("{PER_DEVICE_HEADER}\n");
    for w in res.windows.iter().filter_map(WindowOutcome::result) {
        for mode in [EvalMode::Unbalanced, EvalMode::BalancedTest] {
            for m in &w.evaluation(mode).per_device {
                let _ = writeln!(
                    s,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    w.window_s,
                    mode.as_str(),
                    m.device,
                    m.accuracy,
                    m.precision,
                    m.recall,
                    m.f1,
                    m.support,
                    m.tp,
                    m.fp,
                    m.fn_,
                    m.tn
                );
            }
        }
    }
    s
}

pub fn learning_curve_tsv(points: &[CurvePoint]) -> String {
    let mut s = format!("{CURVE_HEADER}\n");
    for p in points {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            p.fraction, p.n_train_sessions, p.n_train_rows, p.train_accuracy, p.test_accuracy
        );
    }
    s
}

/// Error tallies and the most confused device pairs, per window.
pub fn error_analysis_text(res: &SweepResult) -> String {
    let mut s = String::new();
    for w in &res.windows {
        let Some(r) = w.result() else {
            let _ = writeln!(s, "window {}s: empty\n", w.window_s());
            continue;
        };
        let _ = writeln!(s, "window {}s ({} test rows)", r.window_s, r.n_test_rows);
        match ErrorAnalysis::from_metrics(&r.unbalanced.per_device) {
            Ok(e) => s.push_str(&e.render()),
            Err(e) => {
                let _ = writeln!(s, "{e}");
            }
        }
        let pairs = pairwise_confusions(&r.unbalanced);
        if pairs.is_empty() {
            s.push_str("confused pairs: none\n");
        } else {
            s.push_str("confused pairs:\n");
            for (a, b, n) in pairs.iter().take(5) {
                let _ = writeln!(s, "  {a} <-> {b}: {n}");
            }
        }
        s.push('\n');
    }
    s
}

/// Aligned plain-text table of per-window accuracy statistics.
pub fn render_summary_table(rows: &[SweepRow]) -> String {
    let mut s = format!(
        "{:>9}  {:>8}  {:>8}  {:>8}  {:>8}  {:>8}  {:>10}\n",
        "window_s", "mean", "std", "min", "max", "perfect", "multiclass"
    );
    for r in rows {
        match &r.stats {
            Some(t) => {
                let _ = writeln!(
                    s,
                    "{:>9}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8}  {:>10.4}",
                    r.window_s,
                    t.mean,
                    t.std,
                    t.min,
                    t.max,
                    format!("{}/{}", t.perfect, t.n_devices),
                    t.multiclass
                );
            }
            None => {
                let _ = writeln!(s, "{:>9}  {:>8}", r.window_s, "empty");
            }
        }
    }
    s
}

fn format_err(file: &str, line: usize, reason: impl Into<String>) -> Error {
    ExperimentError::ReportFormat {
        file: file.to_string(),
        line,
        reason: reason.into(),
    }
    .into()
}

fn fields<'a>(file: &str, text: &'a str, header: &str) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == header => {}
        _ => return Err(format_err(file, 1, "unexpected header")),
    }
    let width = header.split('\t').count();
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split('\t').collect();
            if f.len() != width {
                return Err(format_err(file, i + 1, format!("expected {width} fields, got {}", f.len())));
            }
            Ok((i + 1, f))
        })
        .collect()
}

fn num<T: std::str::FromStr>(file: &str, line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| format_err(file, line, format!("bad number {s:?}")))
}

pub fn parse_sweep_tsv(text: &str) -> Result<Vec<SweepRow>> {
    let f = SWEEP_FILE;
    fields(f, text, SWEEP_HEADER)?
        .into_iter()
        .map(|(i, c)| {
            let window_s = num(f, i, c[0])?;
            let stats = match c[1] {
                "empty" => None,
                "ok" => Some(SweepStats {
                    mean: num(f, i, c[2])?,
                    std: num(f, i, c[3])?,
                    min: num(f, i, c[4])?,
                    max: num(f, i, c[5])?,
                    perfect: num(f, i, c[6])?,
                    n_devices: num(f, i, c[7])?,
                    multiclass: num(f, i, c[8])?,
                    mean_balanced_test: num(f, i, c[9])?,
                }),
                other => return Err(format_err(f, i, format!("unknown status {other:?}"))),
            };
            Ok(SweepRow { window_s, stats })
        })
        .collect()
}

pub fn parse_per_device_tsv(text: &str) -> Result<Vec<(f64, EvalMode, DeviceMetrics)>> {
    let f = PER_DEVICE_FILE;
    fields(f, text, PER_DEVICE_HEADER)?
        .into_iter()
        .map(|(i, c)| {
            let mode = EvalMode::parse(c[1]).ok_or_else(|| format_err(f, i, format!("unknown eval mode {:?}", c[1])))?;
            Ok((
                num(f, i, c[0])?,
                mode,
                DeviceMetrics {
                    device: c[2].to_string(),
                    accuracy: num(f, i, c[3])?,
                    precision: num(f, i, c[4])?,
                    recall: num(f, i, c[5])?,
                    f1: num(f, i, c[6])?,
                    support: num(f, i, c[7])?,
                    tp: num(f, i, c[8])?,
                    fp: num(f, i, c[9])?,
                    fn_: num(f, i, c[10])?,
                    tn: num(f, i, c[11])?,
                },
            ))
        })
        .collect()
}

/// Recomputes the per-window summary rows from per-device metrics.
pub fn summaries_from_per_device(rows: &[(f64, EvalMode, DeviceMetrics)], mode: EvalMode) -> Vec<(f64, super::Summary)> {
    let mut windows: Vec<f64> = rows.iter().filter(|r| r.1 == mode).map(|r| r.0).collect();
    windows.dedup();
    windows
        .into_iter()
        .map(|w| {
            let ms: Vec<DeviceMetrics> = rows.iter().filter(|r| r.0 == w && r.1 == mode).map(|r| r.2.clone()).collect();
            (w, summarize(&ms))
        })
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let p = dir.join(name);
    std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    Ok(p)
}

/// Writes whichever report files the given results cover.
pub fn write_reports(dir: &Path, sweep: Option<&SweepResult>, curve: Option<&[CurvePoint]>) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    if let Some(s) = sweep {
        out.push(write(dir, SWEEP_FILE, &sweep_tsv(&s.rows()))?);
        out.push(write(dir, PER_DEVICE_FILE, &per_device_tsv(s))?);
        out.push(write(dir, ERROR_ANALYSIS_FILE, &error_analysis_text(s))?);
    }
    if let Some(c) = curve {
        out.push(write(dir, LEARNING_CURVE_FILE, &learning_curve_tsv(c))?);
    }
    Ok(out)
}
