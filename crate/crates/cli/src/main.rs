//! `iotfp`: synthesize corpora, extract and cache features, train and apply
//! one-vs-rest device models, and run the window sweep and learning curve.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 internal error.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use config::Overrides;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "iotfp", version, about = "Early-window IoT device identification from flow features")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Corpus directory or manifest file.
    #[arg(long, global = true, value_name = "PATH")]
    corpus: Option<PathBuf>,
    /// Feature cache root.
    #[arg(long, global = true, value_name = "DIR")]
    cache: Option<PathBuf>,
    /// Extract features directly instead of going through the cache.
    #[arg(long, global = true)]
    no_cache: bool,
    #[arg(long, global = true, value_name = "DIR")]
    models: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    reports: Option<PathBuf>,
    /// Observation windows in seconds, comma separated and ascending.
    #[arg(long, global = true, value_delimiter = ',', value_name = "S,S,..")]
    windows: Option<Vec<f64>>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "F")]
    train_fraction: Option<f64>,
    /// Report UNKNOWN when the best fused score falls below this value.
    #[arg(long, global = true, value_name = "P")]
    theta: Option<f64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Evaluation mode for summary tables: unbalanced or oversampled_test.
    #[arg(long, global = true, value_name = "MODE")]
    eval_mode: Option<String>,
    #[arg(long, global = true, value_name = "N")]
    n_trees: Option<usize>,
    /// 0 means unlimited.
    #[arg(long, global = true, value_name = "N")]
    max_depth: Option<usize>,
    /// sqrt, log2, all or a fraction in (0, 1].
    #[arg(long, global = true, value_name = "K")]
    max_features: Option<String>,
    /// More log output on standard error (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labelled synthetic corpus and its manifest.
    Synth(commands::SynthArgs),
    /// Parse every capture in the manifest and record session metadata.
    Ingest(commands::IngestArgs),
    /// Extract per-window feature rows into the cache.
    Features,
    /// Print the feature validation report for the training split.
    Prune(commands::WindowArg),
    /// Train a model on every session of the corpus.
    Train(commands::TrainArgs),
    /// Identify the device in one capture.
    Predict(commands::PredictArgs),
    /// Randomized hyperparameter search with session-level folds.
    Search(commands::WindowArg),
    /// Train and evaluate once per observation window.
    Sweep,
    /// Accuracy against the fraction of training sessions used.
    Curve(commands::CurveArgs),
    /// Re-render saved sweep results.
    Report,
    /// Feature cache maintenance.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Subcommand, Debug)]
enum CacheAction {
    /// Check every cached file's checksum.
    Verify,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(cli.global.verbose);
    let g = cli.global;
    let file = match config::load_file(g.config.as_deref()) {
        Ok(f) => f,
        Err(e) => return usage(e),
    };
    let overrides = Overrides {
        corpus: g.corpus,
        cache: g.cache,
        no_cache: g.no_cache,
        models: g.models,
        reports: g.reports,
        windows: g.windows,
        seed: g.seed,
        train_fraction: g.train_fraction,
        theta: g.theta,
        jobs: g.jobs,
        eval_mode: g.eval_mode,
        n_trees: g.n_trees,
        max_depth: g.max_depth,
        max_features: g.max_features,
    };
    let cfg = match config::resolve(file, overrides) {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build_global() {
        eprintln!("error: worker pool: {e}");
        return ExitCode::from(3);
    }
    let outcome = std::panic::catch_unwind(|| match cli.command {
        Command::Synth(a) => commands::synth(&cfg, &a),
        Command::Ingest(a) => commands::ingest(&cfg, &a),
        Command::Features => commands::features(&cfg),
        Command::Prune(a) => commands::prune(&cfg, &a),
        Command::Train(a) => commands::train(&cfg, &a),
        Command::Predict(a) => commands::predict(&cfg, &a),
        Command::Search(a) => commands::search(&cfg, &a),
        Command::Sweep => commands::sweep(&cfg),
        Command::Curve(a) => commands::curve(&cfg, &a),
        Command::Report => commands::report(&cfg),
        Command::Cache { action: CacheAction::Verify } => commands::cache_verify(&cfg),
    });
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
        Err(_) => ExitCode::from(3),
    }
}
