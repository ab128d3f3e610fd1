//! Evaluation drivers: per-device metrics, the window sweep, the learning
//! curve, error analysis and their report files.

mod curve;
mod metrics;
mod report;
mod sweep;

pub use curve::{learning_curve, CurvePoint};
pub use metrics::{
    binary_metrics, evaluate, pairwise_confusions, summarize, DeviceMetrics, ErrorAnalysis, EvalMode, Evaluation,
    Summary,
};
pub use report::{
    error_analysis_text, learning_curve_tsv, parse_per_device_tsv, parse_sweep_tsv, per_device_tsv, render_summary_table,
    summaries_from_per_device, sweep_tsv, write_reports, SweepRow, SweepStats, ERROR_ANALYSIS_FILE, LEARNING_CURVE_FILE, PER_DEVICE_FILE, SWEEP_FILE,
};
pub use sweep::{run_split, window_sweep, DEFAULT_WINDOWS, ExperimentConfig, SweepResult, WindowOutcome, WindowResult};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExperimentError {
    #[error("test sessions also used for training: {0:?}")]
    LeakageDetected(Vec<String>),
    #[error("windows must be positive and strictly ascending: {0:?}")]
    InvalidWindows(Vec<f64>),
    #[error("fractions must lie in (0, 1] and be strictly ascending: {0:?}")]
    InvalidFractions(Vec<f64>),
    #[error("error analysis needs at least one device")]
    NoDevices,
    #[error("report {file} line {line}: {reason}")]
    ReportFormat { file: String, line: usize, reason: String },
}
