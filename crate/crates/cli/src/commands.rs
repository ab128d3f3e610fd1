use crate::config::RunConfig;
use clap::Args;
use iotfp_core::cache::{verify_all, MetaStore};
use iotfp_core::experiments::{
    learning_curve, learning_curve_tsv, parse_per_device_tsv, parse_sweep_tsv, render_summary_table, summaries_from_per_device,
    sweep_tsv, window_sweep, write_reports, EvalMode, ExperimentConfig, SweepStats, PER_DEVICE_FILE, SWEEP_FILE,
};
use iotfp_core::features::FeatureMatrix;
use iotfp_core::flow::{parse_capture, read_manifest, Session};
use iotfp_core::model::{randomized_search_cv, OvRModel};
use iotfp_core::pipeline::{build_matrix, fit_model, load_session, load_sessions, prepare, session_meta, session_rows, Cached, Direct, FeatureSource};
use iotfp_core::preprocess::{drop_nulls, fit_scaler, session_split};
use iotfp_core::pruning::{validate_features, PruneConfig};
use iotfp_core::synth::{builtin_profiles, generate_corpus, parse_profiles, render_profiles};
use iotfp_core::Error;
use rayon::prelude::*;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(s) => f.write_str(s),
            CliError::Data(e) => write!(f, "{e}"),
        }
    }
}

impl<E: Into<Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Data(e.into())
    }
}

type Res = Result<(), CliError>;

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory; defaults to the configured corpus.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Number of built-in device profiles.
    #[arg(long, default_value_t = 8)]
    devices: usize,
    #[arg(long, default_value_t = 10)]
    sessions: usize,
    /// TOML profile file replacing the built-in profiles.
    #[arg(long, value_name = "FILE")]
    profiles: Option<PathBuf>,
    /// Add a near-duplicate of the first profile.
    #[arg(long)]
    sibling: bool,
    /// Print the profiles as TOML and exit.
    #[arg(long)]
    print_profiles: bool,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Timestamp recorded with newly ingested sessions.
    #[arg(long, default_value_t = 0)]
    ingest_ts: u64,
}

#[derive(Args, Debug)]
pub struct WindowArg {
    /// Observation window in seconds; defaults to the first configured window.
    #[arg(long)]
    window: Option<f64>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    window: Option<f64>,
    /// Model file; defaults to `<models>/model.iotfp`.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pcap: PathBuf,
    /// Power-on time in epoch seconds; defaults to the first packet.
    #[arg(long)]
    power_on: Option<f64>,
    /// Defaults to the window the model was trained on.
    #[arg(long)]
    window: Option<f64>,
}

#[derive(Args, Debug)]
pub struct CurveArgs {
    #[arg(long)]
    window: Option<f64>,
    /// Training-session fractions, comma separated and ascending in (0, 1].
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
    fractions: Vec<f64>,
}

fn window_or_default(cfg: &RunConfig, w: Option<f64>) -> Result<f64, CliError> {
    match w {
        Some(w) if !(w.is_finite() && w > 0.0) => Err(CliError::Usage(format!("--window must be positive, got {w}"))),
        Some(w) => Ok(w),
        None => Ok(cfg.first_window()),
    }
}

fn source(cfg: &RunConfig) -> Box<dyn FeatureSource<f64>> {
    if cfg.use_cache {
        Box::new(Cached { root: cfg.cache.clone() })
    } else {
        Box::new(Direct)
    }
}

fn experiment_config(cfg: &RunConfig) -> ExperimentConfig {
    ExperimentConfig {
        params: cfg.params,
        train_fraction: cfg.train_fraction,
        seed: cfg.seed,
        prune: PruneConfig::default(),
        theta: cfg.theta,
    }
}

fn model_path(cfg: &RunConfig, flag: &Option<PathBuf>) -> PathBuf {
    flag.clone().unwrap_or_else(|| cfg.models.join("model.iotfp"))
}

fn write_file(path: &Path, text: &str) -> Res {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn training_rows(cfg: &RunConfig, sessions: &[Session], window: f64) -> Result<FeatureMatrix<f64>, CliError> {
    let m = build_matrix(sessions, Some(window), source(cfg).as_ref())?;
    let pairs: Vec<(String, String)> = sessions.iter().map(|s| (s.session_id.clone(), s.device_label.clone())).collect();
    let split = session_split(&pairs, cfg.train_fraction, cfg.seed)?;
    Ok(m.rows_of_sessions(&split.train))
}

pub fn synth(cfg: &RunConfig, a: &SynthArgs) -> Res {
    if a.sessions == 0 {
        return Err(CliError::Usage("--sessions must be positive".into()));
    }
    let mut profiles = match &a.profiles {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            parse_profiles(&text)?
        }
        None => builtin_profiles(a.devices),
    };
    if a.sibling {
        let Some(first) = profiles.first() else {
            return Err(CliError::Usage("--sibling needs at least one profile".into()));
        };
        let sib = first.sibling(format!("{}-sibling", first.label));
        profiles.push(sib);
    }
    if a.print_profiles {
        print!("{}", render_profiles(&profiles));
        return Ok(());
    }
    let out = a.out.clone().unwrap_or_else(|| cfg.corpus.clone());
    let entries = generate_corpus(&profiles, a.sessions, cfg.seed, &out)?;
    println!("sessions\t{}\tdevices\t{}\tmanifest\t{}", entries.len(), profiles.len(), out.join("manifest.tsv").display());
    Ok(())
}

pub fn ingest(cfg: &RunConfig, a: &IngestArgs) -> Res {
    let entries = read_manifest(&cfg.manifest())?;
    let sessions: Vec<Session> = entries.par_iter().map(load_session).collect::<Result<_, _>>()?;
    let mut store = MetaStore::open(cfg.cache.join("sessions.jsonl"))?;
    let mut added = 0;
    for (e, s) in entries.iter().zip(&sessions) {
        if store.put(session_meta(e, s, a.ingest_ts))? {
            added += 1;
        }
    }
    let flows: usize = sessions.iter().map(|s| s.flows.len()).sum();
    println!("sessions\t{}\tnew\t{}\tflows\t{}", sessions.len(), added, flows);
    Ok(())
}

pub fn features(cfg: &RunConfig) -> Res {
    let sessions = load_sessions(&cfg.manifest())?;
    let cache = Cached { root: cfg.cache.clone() };
    for &w in &cfg.windows {
        let m = build_matrix::<f64>(&sessions, Some(w), &cache)?;
        println!("{w}\t{}", m.n_rows());
    }
    Ok(())
}

pub fn prune(cfg: &RunConfig, a: &WindowArg) -> Res {
    let w = window_or_default(cfg, a.window)?;
    let sessions = load_sessions(&cfg.manifest())?;
    let train = training_rows(cfg, &sessions, w)?;
    let report = validate_features(&train, &PruneConfig::default())?;
    print!("{}", report.render_text());
    Ok(())
}

pub fn train(cfg: &RunConfig, a: &TrainArgs) -> Res {
    let w = window_or_default(cfg, a.window)?;
    let path = model_path(cfg, &a.model);
    let sessions = load_sessions(&cfg.manifest())?;
    let m = build_matrix(&sessions, Some(w), source(cfg).as_ref())?;
    let (model, nulls) = fit_model(&m, &cfg.params.with_seed(cfg.seed), &PruneConfig::default(), Some(w))?;
    if nulls.dropped_rows > 0 {
        log::info!("dropped {} rows with missing values", nulls.dropped_rows);
    }
    model.save(&path)?;
    println!(
        "model\t{}\tdevices\t{}\tfeatures\t{}\trows\t{}",
        path.display(),
        model.forests.len(),
        model.n_features(),
        model.meta.n_train_rows
    );
    Ok(())
}

pub fn predict(cfg: &RunConfig, a: &PredictArgs) -> Res {
    if let Some(w) = a.window {
        window_or_default(cfg, Some(w))?;
    }
    let model = OvRModel::<f64>::load(model_path(cfg, &a.model))?;
    let bytes = std::fs::read(&a.pcap).map_err(|e| Error::io(&a.pcap, e))?;
    let cap = parse_capture(&bytes)?;
    let power_on = a
        .power_on
        .or_else(|| cap.packets.iter().map(|p| p.ts).min_by(f64::total_cmp))
        .unwrap_or(0.0);
    let sid = a.pcap.file_stem().map_or("capture".into(), |s| s.to_string_lossy().into_owned());
    let session = Session::from_packets(sid, "", power_on, cap.packets);
    let window = a.window.or(model.meta.window_s);
    let rows = session_rows::<f64>(&session, window)?;
    let ds = prepare(&model, &rows)?;
    let p = model.predict_mean(&ds, cfg.theta)?;
    let w = window.map_or("none".to_string(), |w| w.to_string());
    println!("{}\t{:.6}\t{w}", p.label(), p.score);
    Ok(())
}

pub fn search(cfg: &RunConfig, a: &WindowArg) -> Res {
    let w = window_or_default(cfg, a.window)?;
    let sessions = load_sessions(&cfg.manifest())?;
    let train = training_rows(cfg, &sessions, w)?;
    let report = validate_features(&train, &PruneConfig::default())?;
    let (clean, _) = drop_nulls(&report.apply(&train)?)?;
    let ds = fit_scaler(&clean).transform(&clean)?;
    let (best, cv) = randomized_search_cv(&ds, &cfg.search, cfg.seed)?;
    write_file(&cfg.reports.join("cv_report.tsv"), &cv.render_tsv())?;
    println!("{best}\tmean_cv_acc={:.6}", cv.best().mean);
    Ok(())
}

pub fn sweep(cfg: &RunConfig) -> Res {
    let sessions = load_sessions(&cfg.manifest())?;
    let res = window_sweep(&sessions, &cfg.windows, &experiment_config(cfg), source(cfg).as_ref())?;
    write_reports(&cfg.reports, Some(&res), None)?;
    print!("{}", sweep_tsv(&res.rows()));
    Ok(())
}

pub fn curve(cfg: &RunConfig, a: &CurveArgs) -> Res {
    let w = window_or_default(cfg, a.window)?;
    if a.fractions.is_empty()
        || a.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0))
        || a.fractions.windows(2).any(|p| p[0] >= p[1])
    {
        return Err(CliError::Usage(format!("--fractions must be ascending in (0, 1], got {:?}", a.fractions)));
    }
    let sessions = load_sessions(&cfg.manifest())?;
    let m = build_matrix(&sessions, Some(w), source(cfg).as_ref())?;
    let pts = learning_curve(&m, &a.fractions, &experiment_config(cfg), Some(w))?;
    write_reports(&cfg.reports, None, Some(&pts))?;
    print!("{}", learning_curve_tsv(&pts));
    Ok(())
}

/// Re-renders `sweep.tsv`, checking it against the per-device metrics it
/// summarizes.
pub fn report(cfg: &RunConfig) -> Res {
    let read = |name: &str| {
        let p = cfg.reports.join(name);
        std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
    };
    let mut rows = parse_sweep_tsv(&read(SWEEP_FILE)?)?;
    let per = parse_per_device_tsv(&read(PER_DEVICE_FILE)?)?;
    for (w, s) in summaries_from_per_device(&per, EvalMode::Unbalanced) {
        let row = rows.iter().find(|r| r.window_s == w);
        let consistent = row.and_then(|r| r.stats.as_ref()).is_some_and(|t| {
            t.mean == s.mean && t.std == s.std && t.min == s.min && t.max == s.max && t.perfect == s.perfect
        });
        if !consistent {
            return Err(CliError::Data(
                iotfp_core::experiments::ExperimentError::ReportFormat {
                    file: SWEEP_FILE.into(),
                    line: 0,
                    reason: format!("window {w}: summary disagrees with {PER_DEVICE_FILE}"),
                }
                .into(),
            ));
        }
    }
    if cfg.eval_mode == EvalMode::BalancedTest {
        let sums = summaries_from_per_device(&per, EvalMode::BalancedTest);
        for r in rows.iter_mut() {
            if let (Some(t), Some((_, s))) = (r.stats.as_mut(), sums.iter().find(|(w, _)| *w == r.window_s)) {
                *t = SweepStats {
                    mean: s.mean,
                    std: s.std,
                    min: s.min,
                    max: s.max,
                    perfect: s.perfect,
                    n_devices: s.n_devices,
                    multiclass: f64::NAN,
                    mean_balanced_test: s.mean,
                };
            }
        }
    }
    print!("{}", render_summary_table(&rows));
    Ok(())
}

pub fn cache_verify(cfg: &RunConfig) -> Res {
    let r = verify_all(&cfg.cache)?;
    for (p, why) in &r.corrupt {
        println!("corrupt\t{}\t{why}", p.display());
    }
    println!("ok\t{}\tcorrupt\t{}", r.ok.len(), r.corrupt.len());
    if r.corrupt.is_empty() {
        Ok(())
    } else {
        Err(CliError::Data(
            iotfp_core::cache::CacheError::CorruptFile {
                path: r.corrupt[0].0.display().to_string(),
                reason: format!("{} corrupt cache files", r.corrupt.len()),
            }
            .into(),
        ))
    }
}
