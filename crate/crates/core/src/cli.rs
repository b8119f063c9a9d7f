//! Command-line front end.
//!
//! `run` drives one full experiment, `sweep` a known-fraction grid, and
//! `assign` batch cluster export from a checkpoint. Option precedence is
//! CLI flag over config file over built-in default, and the fully resolved
//! configuration is echoed into the run manifest.

use crate::data::{read_samples_jsonl, Sample};
use crate::experiment::{
    assign_corpus, named_blob_spec, run_experiment, run_sweep, Checkpoint, DataConfig,
    ExperimentConfig, ExperimentError, SweepConfig,
};
use crate::synth::BlobSpec;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "dcsc",
    version,
    about = "Semi-supervised intent clustering: contrastive two-stage training with balanced pseudo-assignments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run split -> warm-up -> head init -> clustering -> evaluation.
    Run(RunArgs),
    /// Run a grid over known fractions and seeds and aggregate a table.
    Sweep(SweepArgs),
    /// Assign clusters to a corpus using a trained checkpoint.
    Assign(AssignArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Config file (TOML or JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Synthetic corpus: a profile name (default, easy, hard, tokens) or a
    /// path to a blob-spec file.
    #[arg(long)]
    pub synth: Option<String>,
    #[arg(long)]
    pub known_fraction: Option<f64>,
    #[arg(long)]
    pub labeled_ratio: Option<f64>,
    /// Root seed; every random substream derives from it.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs_warmup: Option<usize>,
    #[arg(long)]
    pub epochs_cluster: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub sinkhorn_eps: Option<f64>,
    #[arg(long)]
    pub sinkhorn_iters: Option<usize>,
    /// Drop supervised training from the clustering stage.
    #[arg(long)]
    pub ablate_sup_cluster: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Config file with a [sweep] section.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AssignArgs {
    /// Final checkpoint produced by `run`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Corpus to assign (JSONL).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output JSONL path (defaults to assignments.jsonl next to the corpus).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Everything a config file may set; every field optional so files can be
/// partial.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    out: Option<PathBuf>,
    data: Option<DataConfig>,
    split: Option<PartialSplit>,
    eval: Option<PartialEval>,
    train: Option<crate::trainer::TrainConfig>,
    sweep: Option<SweepConfig>,
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PartialSplit {
    known_fraction: Option<f64>,
    labeled_ratio: Option<f64>,
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PartialEval {
    test_fraction: Option<f64>,
}

fn load_file_config(path: &Path) -> Result<FileConfig, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        serde_json::from_str(&text)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))
    }
}

/// A config file for `run` may also be a manifest from a previous run; its
/// `config` field is then the experiment config.
fn load_run_config(path: &Path) -> Result<(ExperimentConfig, Option<PathBuf>, Option<SweepConfig>), ExperimentError> {
    #[derive(Deserialize)]
    struct ManifestEnvelope {
        config: ExperimentConfig,
    }
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if let Ok(envelope) = serde_json::from_str::<ManifestEnvelope>(&text) {
            return Ok((envelope.config, None, None));
        }
    }
    let file = load_file_config(path)?;
    let mut cfg = ExperimentConfig::default();
    if let Some(data) = file.data {
        cfg.data = data;
    }
    if let Some(split) = file.split {
        if let Some(v) = split.known_fraction {
            cfg.split.known_fraction = v;
        }
        if let Some(v) = split.labeled_ratio {
            cfg.split.labeled_ratio = v;
        }
    }
    if let Some(eval) = file.eval {
        if let Some(v) = eval.test_fraction {
            cfg.eval.test_fraction = v;
        }
    }
    if let Some(train) = file.train {
        cfg.train = train;
    }
    Ok((cfg, file.out, file.sweep))
}

fn resolve_synth(value: &str, run_seed: u64) -> Result<DataConfig, ExperimentError> {
    if named_blob_spec(value, run_seed).is_some() {
        return Ok(DataConfig::Synth {
            profile: Some(value.to_string()),
            blob: None,
        });
    }
    let path = Path::new(value);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let blob: BlobSpec = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text)
                .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?
        };
        return Ok(DataConfig::Synth {
            profile: None,
            blob: Some(blob),
        });
    }
    Err(ExperimentError::Config(format!(
        "--synth {value:?} is neither a known profile nor a readable spec file"
    )))
}

fn resolve_run(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf), ExperimentError> {
    let (mut cfg, file_out, _) = match &args.config {
        Some(path) => load_run_config(path)?,
        None => (ExperimentConfig::default(), None, None),
    };
    if args.config.is_none() && args.synth.is_none() {
        return Err(ExperimentError::Config(
            "nothing to run: pass --config or --synth".into(),
        ));
    }
    // CLI overrides beat the file.
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    if let Some(synth) = &args.synth {
        cfg.data = resolve_synth(synth, cfg.train.seed)?;
    }
    if let Some(v) = args.known_fraction {
        cfg.split.known_fraction = v;
    }
    if let Some(v) = args.labeled_ratio {
        cfg.split.labeled_ratio = v;
    }
    if let Some(v) = args.epochs_warmup {
        cfg.train.warmup_epochs = v;
    }
    if let Some(v) = args.epochs_cluster {
        cfg.train.cluster_epochs = v;
    }
    if let Some(v) = args.tau {
        cfg.train.tau = v;
    }
    if let Some(v) = args.sinkhorn_eps {
        cfg.train.sinkhorn_epsilon = v;
    }
    if let Some(v) = args.sinkhorn_iters {
        cfg.train.sinkhorn_iterations = v;
    }
    if args.ablate_sup_cluster {
        cfg.train.ablate_supervised_cluster = true;
    }
    let out = args
        .out
        .clone()
        .or(file_out)
        .unwrap_or_else(|| PathBuf::from("runs/latest"));
    Ok((cfg, out))
}

fn sweep_threads() -> usize {
    std::env::var("DCSC_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or(1)
}

fn read_assign_samples(path: &Path) -> Result<Vec<Sample>, ExperimentError> {
    Ok(read_samples_jsonl(path)?)
}

fn cmd_run(args: &RunArgs) -> Result<(), ExperimentError> {
    let (cfg, out) = resolve_run(args)?;
    let artifacts = run_experiment(&cfg, &out)?;
    print!("{}", std::fs::read_to_string(out.join("report.txt")).unwrap_or_default());
    println!("metrics: {}", artifacts.metrics);
    println!("artifacts: {}", artifacts.out_dir.display());
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), ExperimentError> {
    let (cfg, file_out, sweep) = load_run_config(&args.config)?;
    let sweep = sweep.ok_or_else(|| {
        ExperimentError::Config(format!("{} has no [sweep] section", args.config.display()))
    })?;
    let out = args
        .out
        .clone()
        .or(file_out)
        .unwrap_or_else(|| PathBuf::from("runs/sweep"));
    let report = run_sweep(&cfg, &sweep, &out, sweep_threads())?;
    print!("{}", report.table_markdown);
    println!("artifacts: {}", out.display());
    Ok(())
}

fn cmd_assign(args: &AssignArgs) -> Result<(), ExperimentError> {
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let samples = read_assign_samples(&args.corpus)?;
    let out = args.out.clone().unwrap_or_else(|| {
        args.corpus
            .parent()
            .unwrap_or(Path::new("."))
            .join("assignments.jsonl")
    });
    let count = assign_corpus(&checkpoint, &samples, &out)?;
    println!("assigned {count} samples -> {}", out.display());
    Ok(())
}

fn structured_error(err: &ExperimentError) {
    let kind = match err {
        ExperimentError::Config(_) => "config",
        ExperimentError::Data(_) => "data",
        ExperimentError::Synth(_) => "synth",
        ExperimentError::Train(_) => "train",
        ExperimentError::Io { .. } => "io",
        ExperimentError::Validation(_) => "validation",
        ExperimentError::SweepFailures { .. } => "sweep",
    };
    let payload = serde_json::json!({ "error": err.to_string(), "kind": kind });
    eprintln!("{payload}");
}

/// Parse and dispatch; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version are not errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Assign(args) => cmd_assign(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            structured_error(&e);
            1
        }
    }
}
