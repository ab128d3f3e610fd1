//! Run configuration: an optional TOML file overlaid by command-line flags.

use iotfp_core::experiments::{EvalMode, DEFAULT_WINDOWS};
use iotfp_core::model::{HyperParams, MaxFeatures, SearchSpace};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub corpus: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub models: Option<PathBuf>,
    pub reports: Option<PathBuf>,
    pub windows: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub train_fraction: Option<f64>,
    pub theta: Option<f64>,
    pub use_cache: Option<bool>,
    pub jobs: Option<usize>,
    pub eval_mode: Option<String>,
    pub params: Option<ParamsConfig>,
    pub search: Option<SearchConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub n_trees: Option<usize>,
    /// Absent means unlimited.
    pub max_depth: Option<usize>,
    pub min_samples_split: Option<usize>,
    pub min_samples_leaf: Option<usize>,
    pub max_features: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub n_trees: Option<Vec<usize>>,
    /// 0 stands for unlimited depth.
    pub max_depth: Option<Vec<usize>>,
    pub min_samples_split: Option<Vec<usize>>,
    pub min_samples_leaf: Option<Vec<usize>>,
    pub max_features: Option<Vec<String>>,
    pub n_iter: Option<usize>,
    pub k_folds: Option<usize>,
}

/// Flag values that override the file; `None` leaves the file value.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub corpus: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub no_cache: bool,
    pub models: Option<PathBuf>,
    pub reports: Option<PathBuf>,
    pub windows: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub train_fraction: Option<f64>,
    pub theta: Option<f64>,
    pub jobs: Option<usize>,
    pub eval_mode: Option<String>,
    pub n_trees: Option<usize>,
    pub max_depth: Option<usize>,
    pub max_features: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub cache: PathBuf,
    pub models: PathBuf,
    pub reports: PathBuf,
    pub windows: Vec<f64>,
    pub seed: u64,
    pub train_fraction: f64,
    pub theta: Option<f64>,
    pub use_cache: bool,
    pub jobs: usize,
    pub eval_mode: EvalMode,
    pub params: HyperParams,
    pub search: SearchSpace,
}

impl RunConfig {
    /// Manifest path; a corpus directory implies its `manifest.tsv`.
    pub fn manifest(&self) -> PathBuf {
        if self.corpus.is_dir() {
            self.corpus.join("manifest.tsv")
        } else {
            self.corpus.clone()
        }
    }

    pub fn first_window(&self) -> f64 {
        self.windows[0]
    }
}

fn max_features(s: &str) -> Result<MaxFeatures, String> {
    s.parse()
}

pub fn load_file(path: Option<&Path>) -> Result<FileConfig, String> {
    let Some(p) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(p).map_err(|e| format!("--config {}: {e}", p.display()))?;
    toml::from_str(&text).map_err(|e| format!("--config {}: {e}", p.display()))
}

/// Merges file and flags and validates every field.
pub fn resolve(file: FileConfig, o: Overrides) -> Result<RunConfig, String> {
    let fp = file.params.unwrap_or_default();
    let defaults = HyperParams::default();
    let params = HyperParams {
        n_trees: o.n_trees.or(fp.n_trees).unwrap_or(defaults.n_trees),
        max_depth: match o.max_depth {
            Some(0) => None,
            Some(d) => Some(d),
            None => fp.max_depth.or(defaults.max_depth),
        },
        min_samples_split: fp.min_samples_split.unwrap_or(defaults.min_samples_split),
        min_samples_leaf: fp.min_samples_leaf.unwrap_or(defaults.min_samples_leaf),
        max_features: match o.max_features.or(fp.max_features) {
            Some(s) => max_features(&s)?,
            None => defaults.max_features,
        },
        seed: 0,
    };
    params.validate().map_err(|e| e.to_string())?;

    let fs = file.search.unwrap_or_default();
    let ds = SearchSpace::default();
    let search = SearchSpace {
        n_trees: fs.n_trees.unwrap_or(ds.n_trees),
        max_depth: match fs.max_depth {
            Some(v) => v.into_iter().map(|d| (d > 0).then_some(d)).collect(),
            None => ds.max_depth,
        },
        min_samples_split: fs.min_samples_split.unwrap_or(ds.min_samples_split),
        min_samples_leaf: fs.min_samples_leaf.unwrap_or(ds.min_samples_leaf),
        max_features: match fs.max_features {
            Some(v) => v.iter().map(|s| max_features(s)).collect::<Result<_, _>>()?,
            None => ds.max_features,
        },
        n_iter: fs.n_iter.unwrap_or(ds.n_iter),
        k_folds: fs.k_folds.unwrap_or(ds.k_folds),
    };
    if search.is_empty() {
        return Err("search: every dimension needs at least one value and n_iter must be positive".into());
    }
    if search.k_folds < 2 {
        return Err(format!("search.k_folds must be at least 2, got {}", search.k_folds));
    }

    let windows = o.windows.or(file.windows).unwrap_or_else(|| DEFAULT_WINDOWS.to_vec());
    if windows.is_empty()
        || windows.iter().any(|w| !(w.is_finite() && *w > 0.0))
        || windows.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(format!("--windows must be positive and strictly ascending, got {windows:?}"));
    }
    let train_fraction = o.train_fraction.or(file.train_fraction).unwrap_or(0.8);
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(format!("--train-fraction must lie in (0, 1), got {train_fraction}"));
    }
    let theta = o.theta.or(file.theta);
    if let Some(t) = theta {
        if !(0.0..=1.0).contains(&t) {
            return Err(format!("--theta must lie in [0, 1], got {t}"));
        }
    }
    let jobs = o.jobs.or(file.jobs).unwrap_or(1);
    if jobs == 0 {
        return Err("--jobs must be at least 1".into());
    }
    let eval_mode = match o.eval_mode.or(file.eval_mode) {
        Some(s) => EvalMode::parse(&s).ok_or_else(|| format!("--eval-mode must be unbalanced or oversampled_test, got {s:?}"))?,
        None => EvalMode::Unbalanced,
    };
    Ok(RunConfig {
        corpus: o.corpus.or(file.corpus).unwrap_or_else(|| "corpus".into()),
        cache: o.cache.or(file.cache).unwrap_or_else(|| "cache".into()),
        models: o.models.or(file.models).unwrap_or_else(|| "models".into()),
        reports: o.reports.or(file.reports).unwrap_or_else(|| "reports".into()),
        windows,
        seed: o.seed.or(file.seed).unwrap_or(0),
        train_fraction,
        theta,
        use_cache: !o.no_cache && file.use_cache.unwrap_or(true),
        jobs,
        eval_mode,
        params,
        search,
    })
}
