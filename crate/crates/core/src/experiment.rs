//! End-to-end experiment orchestration: data loading, the two-stage training
//! run, evaluation, artifact emission (manifest, metrics, checkpoints), and
//! the known-fraction sweep grid.

use crate::data::{
    canonical_jsonl, read_corpus_csv, read_corpus_jsonl, split_corpus, train_test_split,
    write_samples_jsonl, Corpus, DataError, SplitSpec,
};
use crate::encoder::EncoderParams;
use crate::metrics::MetricReport;
use crate::seed::derive_seed;
use crate::synth::{generate, BlobSpec, SynthError, TokenMode};
use crate::trainer::{
    self, clustering_stage, evaluate, init_cluster_head, warmup_stage, ClusterEpochLosses,
    TrainConfig, TrainError, TrainPools, TrainState, WarmupEpochLosses,
};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("artifact validation failed: {0}")]
    Validation(String),
    #[error("sweep had {failed} failing cell(s) out of {total}")]
    SweepFailures { failed: usize, total: usize },
}

fn io_err(path: &Path, source: std::io::Error) -> ExperimentError {
    ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    #[default]
    Jsonl,
    Csv,
}

/// Where the corpus comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataConfig {
    Synth {
        #[serde(default)]
        profile: Option<String>,
        #[serde(default)]
        blob: Option<BlobSpec>,
    },
    Files {
        train: PathBuf,
        #[serde(default)]
        test: Option<PathBuf>,
        #[serde(default)]
        num_intents: Option<usize>,
        #[serde(default)]
        format: FileFormat,
    },
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig::Synth {
            profile: Some("default".into()),
            blob: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub known_fraction: f64,
    pub labeled_ratio: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            known_fraction: 0.5,
            labeled_ratio: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Stratified holdout used when no explicit test corpus is provided.
    pub test_fraction: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { test_fraction: 0.2 }
    }
}

/// Fully resolved configuration of one run; the manifest echoes this back so
/// no default stays silent.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub split: SplitConfig,
    pub eval: EvalConfig,
    pub train: TrainConfig,
}

/// Named synthetic corpus profiles. The blob seed is derived from the run
/// seed so different `--seed` values produce different corpora.
pub fn named_blob_spec(name: &str, run_seed: u64) -> Option<BlobSpec> {
    let seed = derive_seed(run_seed, "synth-corpus");
    let base = BlobSpec {
        seed,
        ..BlobSpec::default()
    };
    match name {
        // Raw-feature K-Means++ lands mid-range on this profile, leaving
        // headroom the trained pipeline is expected to claim.
        "default" => Some(BlobSpec {
            sigma: 2.4,
            ..base
        }),
        "easy" => Some(BlobSpec {
            sigma: 0.5,
            ..base
        }),
        "hard" => Some(BlobSpec {
            sigma: 1.2,
            hard_mode: true,
            ..base
        }),
        "tokens" => Some(BlobSpec {
            clusters: 6,
            per_cluster: 80,
            dim: 8,
            sigma: 0.8,
            token_mode: Some(TokenMode {
                min_len: 2,
                max_len: 5,
            }),
            ..base
        }),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub warmup_secs: f64,
    pub head_init_secs: f64,
    pub clustering_secs: f64,
    pub evaluation_secs: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EpochCurves {
    pub warmup: Vec<WarmupEpochLosses>,
    pub cluster: Vec<ClusterEpochLosses>,
}

/// Everything needed to reproduce and audit one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub dataset_fingerprint: String,
    pub train_samples: usize,
    pub test_samples: usize,
    pub num_intents: usize,
    pub known_intents: usize,
    pub stage_timings: StageTimings,
    pub epoch_losses: EpochCurves,
    /// K-Means++ on raw pooled input features of the test set.
    pub baseline_raw_features: MetricReport,
    /// K-Means++ on the untrained encoder's test representations.
    pub baseline_init_encoder: MetricReport,
    pub final_metrics: MetricReport,
    pub head_argmax_metrics: Option<MetricReport>,
    pub warnings: Vec<String>,
}

/// Portable parameter dump; enough to re-encode and assign new corpora.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub input_dim: usize,
    pub known_intents: usize,
    pub encoder: EncoderParams,
    #[serde(default)]
    pub classifier: Option<Array2<f64>>,
    #[serde(default)]
    pub bank: Option<crate::assignment::PrototypeBank>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), ExperimentError> {
        let json = serde_json::to_string(self).expect("checkpoint serialization");
        std::fs::write(path, json).map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| ExperimentError::Validation(format!("bad checkpoint {}: {e}", path.display())))
    }
}

pub struct RunArtifacts {
    pub manifest: RunManifest,
    pub metrics: MetricReport,
    pub out_dir: PathBuf,
}

fn fingerprint(train: &Corpus, test: &Corpus) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical_jsonl(train.samples()));
    hasher.update(canonical_jsonl(test.samples()));
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn load_corpora(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<(Corpus, Corpus), ExperimentError> {
    match &cfg.data {
        DataConfig::Synth { profile, blob } => {
            let spec = match (blob, profile) {
                (Some(spec), _) => spec.clone(),
                (None, Some(name)) => named_blob_spec(name, cfg.train.seed).ok_or_else(|| {
                    ExperimentError::Config(format!("unknown synth profile {name:?}"))
                })?,
                (None, None) => {
                    return Err(ExperimentError::Config(
                        "synth data source needs a profile or a blob spec".into(),
                    ))
                }
            };
            let corpus = generate(&spec)?;
            let (train, test) = train_test_split(
                &corpus,
                cfg.eval.test_fraction,
                derive_seed(cfg.train.seed, "test-holdout"),
            )?;
            write_samples_jsonl(&out_dir.join("train.jsonl"), train.samples())?;
            write_samples_jsonl(&out_dir.join("test.jsonl"), test.samples())?;
            Ok((train, test))
        }
        DataConfig::Files {
            train,
            test,
            num_intents,
            format,
        } => {
            let read = |path: &Path| -> Result<Corpus, DataError> {
                match format {
                    FileFormat::Jsonl => read_corpus_jsonl(path, *num_intents),
                    FileFormat::Csv => read_corpus_csv(path, *num_intents),
                }
            };
            let train_corpus = read(train)?;
            match test {
                Some(path) => Ok((train_corpus, read(path)?)),
                None => Ok(train_test_split(
                    &train_corpus,
                    cfg.eval.test_fraction,
                    derive_seed(cfg.train.seed, "test-holdout"),
                )?),
            }
        }
    }
}

/// Execute one full run and write its artifacts into `out_dir`:
/// `manifest.json`, `metrics.json`, `report.txt`, per-stage checkpoints, and
/// (for synthetic data) the generated corpora.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<RunArtifacts, ExperimentError> {
    cfg.train.validate()?;
    if !(cfg.eval.test_fraction > 0.0 && cfg.eval.test_fraction < 1.0) {
        return Err(ExperimentError::Config(format!(
            "test_fraction {} not in (0, 1)",
            cfg.eval.test_fraction
        )));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;

    let (train_corpus, test_corpus) = load_corpora(cfg, out_dir)?;
    let dataset_fingerprint = fingerprint(&train_corpus, &test_corpus);

    let split = split_corpus(
        &train_corpus,
        &SplitSpec {
            known_fraction: cfg.split.known_fraction,
            labeled_ratio: cfg.split.labeled_ratio,
            seed: derive_seed(cfg.train.seed, "split"),
        },
    )?;
    let pools = TrainPools::from_split(&split)?;
    let mut state = TrainState::new(&pools, split.known_intents, &cfg.train)?;

    let baseline_raw_features =
        trainer::raw_feature_baseline(&test_corpus, &split, cfg.train.seed)?;
    let baseline_init_encoder = evaluate(&state, &cfg.train, &test_corpus, &split)?.kmeans;

    let mut timings = StageTimings::default();
    let t = Instant::now();
    warmup_stage(&mut state, &cfg.train, &pools)?;
    timings.warmup_secs = t.elapsed().as_secs_f64();
    Checkpoint {
        input_dim: train_corpus.feature_dim(),
        known_intents: split.known_intents,
        encoder: state.encoder.clone(),
        classifier: Some(state.classifier_weights().to_owned()),
        bank: None,
    }
    .save(&out_dir.join("checkpoint_warmup.json"))?;

    let t = Instant::now();
    init_cluster_head(&mut state, &cfg.train, &pools, split.num_intents)?;
    timings.head_init_secs = t.elapsed().as_secs_f64();

    let t = Instant::now();
    clustering_stage(&mut state, &cfg.train, &pools)?;
    timings.clustering_secs = t.elapsed().as_secs_f64();
    Checkpoint {
        input_dim: train_corpus.feature_dim(),
        known_intents: split.known_intents,
        encoder: state.encoder.clone(),
        classifier: None,
        bank: state.prototype_bank().cloned(),
    }
    .save(&out_dir.join("checkpoint_final.json"))?;

    let t = Instant::now();
    let report = evaluate(&state, &cfg.train, &test_corpus, &split)?;
    timings.evaluation_secs = t.elapsed().as_secs_f64();

    let manifest = RunManifest {
        config: cfg.clone(),
        dataset_fingerprint,
        train_samples: train_corpus.len(),
        test_samples: test_corpus.len(),
        num_intents: split.num_intents,
        known_intents: split.known_intents,
        stage_timings: timings,
        epoch_losses: EpochCurves {
            warmup: state.history.warmup_epochs.clone(),
            cluster: state.history.cluster_epochs.clone(),
        },
        baseline_raw_features,
        baseline_init_encoder,
        final_metrics: report.kmeans,
        head_argmax_metrics: report.head_argmax,
        warnings: state.warnings.clone(),
    };

    let metrics_json =
        serde_json::to_string_pretty(&report.kmeans).expect("metric serialization");
    std::fs::write(out_dir.join("metrics.json"), &metrics_json)
        .map_err(|e| io_err(&out_dir.join("metrics.json"), e))?;
    let manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serialization");
    std::fs::write(out_dir.join("manifest.json"), &manifest_json)
        .map_err(|e| io_err(&out_dir.join("manifest.json"), e))?;
    std::fs::write(out_dir.join("report.txt"), human_report(&manifest))
        .map_err(|e| io_err(&out_dir.join("report.txt"), e))?;

    validate_artifacts(out_dir)?;
    Ok(RunArtifacts {
        manifest,
        metrics: report.kmeans,
        out_dir: out_dir.to_path_buf(),
    })
}

fn human_report(manifest: &RunManifest) -> String {
    let mut out = String::new();
    out.push_str("known_fraction  method                 ACC     ARI     NMI\n");
    let method = if manifest.config.train.ablate_supervised_cluster {
        "no-supervised-cluster"
    } else {
        "full"
    };
    let m = &manifest.final_metrics;
    out.push_str(&format!(
        "{:<15} {:<22} {:.4}  {:.4}  {:.4}\n",
        format!("{:.2}", manifest.config.split.known_fraction),
        method,
        m.acc,
        m.ari,
        m.nmi
    ));
    if let Some(h) = &manifest.head_argmax_metrics {
        out.push_str(&format!(
            "{:<15} {:<22} {:.4}  {:.4}  {:.4}\n",
            "", "head-argmax", h.acc, h.ari, h.nmi
        ));
    }
    let raw = &manifest.baseline_raw_features;
    let init = &manifest.baseline_init_encoder;
    out.push_str(&format!(
        "baselines: raw-features ACC {:.4} / init-encoder ACC {:.4}\n",
        raw.acc, init.acc
    ));
    out
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

/// Re-read the emitted artifacts and check their schemas.
pub fn validate_artifacts(out_dir: &Path) -> Result<(), ExperimentError> {
    let metrics_path = out_dir.join("metrics.json");
    let text = std::fs::read_to_string(&metrics_path).map_err(|e| io_err(&metrics_path, e))?;
    let metrics: MetricReport = serde_json::from_str(&text)
        .map_err(|e| ExperimentError::Validation(format!("metrics.json: {e}")))?;
    if !(in_unit(metrics.acc) && in_unit(metrics.nmi) && (-1.0..=1.0).contains(&metrics.ari)) {
        return Err(ExperimentError::Validation(format!(
            "metrics out of range: {metrics:?}"
        )));
    }
    let manifest_path = out_dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
    let _: RunManifest = serde_json::from_str(&text)
        .map_err(|e| ExperimentError::Validation(format!("manifest.json: {e}")))?;
    Ok(())
}

// ----- sweep -----

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub include_ablation: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCell {
    pub known_fraction: f64,
    pub seed: u64,
    pub ablation: bool,
    pub out_dir: String,
    pub metrics: Option<MetricReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    pub table_markdown: String,
}

fn cell_dir(fraction: f64, seed: u64, ablation: bool) -> String {
    let suffix = if ablation { "_ablate" } else { "" };
    format!("kf{fraction:.2}_seed{seed}{suffix}")
}

/// Run the full grid `fractions x seeds x {full, ablation?}`, aggregate the
/// per-cell metrics into a markdown table, and write `sweep.json` and
/// `report.md`. Fails (after recording every cell) if any cell failed.
pub fn run_sweep(
    base: &ExperimentConfig,
    sweep: &SweepConfig,
    out_dir: &Path,
    threads: usize,
) -> Result<SweepReport, ExperimentError> {
    if sweep.fractions.is_empty() {
        return Err(ExperimentError::Config("sweep has no known fractions".into()));
    }
    if sweep.seeds.is_empty() {
        return Err(ExperimentError::Config("sweep has no seeds".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;

    let variants: Vec<bool> = if sweep.include_ablation {
        vec![false, true]
    } else {
        vec![false]
    };
    let mut jobs = Vec::new();
    for &fraction in &sweep.fractions {
        for &seed in &sweep.seeds {
            for &ablation in &variants {
                let mut cfg = base.clone();
                cfg.split.known_fraction = fraction;
                cfg.train.seed = seed;
                cfg.train.ablate_supervised_cluster = ablation;
                let dir = out_dir.join(cell_dir(fraction, seed, ablation));
                jobs.push((fraction, seed, ablation, cfg, dir));
            }
        }
    }

    let threads = threads.max(1);
    let mut cells: Vec<Option<SweepCell>> = vec![None; jobs.len()];
    for chunk_start in (0..jobs.len()).step_by(threads) {
        let chunk_end = (chunk_start + threads).min(jobs.len());
        let results: Vec<(usize, SweepCell)> = std::thread::scope(|scope| {
            let handles: Vec<_> = jobs[chunk_start..chunk_end]
                .iter()
                .enumerate()
                .map(|(offset, (fraction, seed, ablation, cfg, dir))| {
                    scope.spawn(move || {
                        let outcome = run_experiment(cfg, dir);
                        let cell = match outcome {
                            Ok(artifacts) => SweepCell {
                                known_fraction: *fraction,
                                seed: *seed,
                                ablation: *ablation,
                                out_dir: dir.display().to_string(),
                                metrics: Some(artifacts.metrics),
                                error: None,
                            },
                            Err(e) => SweepCell {
                                known_fraction: *fraction,
                                seed: *seed,
                                ablation: *ablation,
                                out_dir: dir.display().to_string(),
                                metrics: None,
                                error: Some(e.to_string()),
                            },
                        };
                        (chunk_start + offset, cell)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("no panics")).collect()
        });
        for (index, cell) in results {
            cells[index] = Some(cell);
        }
    }
    let cells: Vec<SweepCell> = cells.into_iter().map(|c| c.expect("all cells ran")).collect();

    let table_markdown = sweep_table(&cells, &variants, &sweep.fractions);
    let report = SweepReport {
        cells,
        table_markdown,
    };
    let json = serde_json::to_string_pretty(&report).expect("sweep serialization");
    std::fs::write(out_dir.join("sweep.json"), json)
        .map_err(|e| io_err(&out_dir.join("sweep.json"), e))?;
    std::fs::write(out_dir.join("report.md"), &report.table_markdown)
        .map_err(|e| io_err(&out_dir.join("report.md"), e))?;

    let failed = report.cells.iter().filter(|c| c.error.is_some()).count();
    if failed > 0 {
        return Err(ExperimentError::SweepFailures {
            failed,
            total: report.cells.len(),
        });
    }
    Ok(report)
}

fn sweep_table(cells: &[SweepCell], variants: &[bool], fractions: &[f64]) -> String {
    let mut out = String::from("| Known intents | Method | ACC | ARI | NMI |\n|---|---|---|---|---|\n");
    for &fraction in fractions {
        for &ablation in variants {
            let group: Vec<&SweepCell> = cells
                .iter()
                .filter(|c| c.known_fraction == fraction && c.ablation == ablation && c.metrics.is_some())
                .collect();
            let method = if ablation { "no-supervised-cluster" } else { "full" };
            if group.is_empty() {
                out.push_str(&format!(
                    "| {:.0}% | {method} | failed | failed | failed |\n",
                    fraction * 100.0
                ));
                continue;
            }
            let mean = |f: fn(&MetricReport) -> f64| -> f64 {
                group.iter().map(|c| f(c.metrics.as_ref().unwrap())).sum::<f64>() / group.len() as f64
            };
            out.push_str(&format!(
                "| {:.0}% | {method} | {:.4} | {:.4} | {:.4} |\n",
                fraction * 100.0,
                mean(|m| m.acc),
                mean(|m| m.ari),
                mean(|m| m.nmi)
            ));
        }
    }
    out
}

// ----- batch assignment export -----

/// Assign every sample of a corpus to its argmax cluster under a final
/// checkpoint. Lines are `{"id", "cluster", "known_intent_flag"}`.
pub fn assign_corpus(
    checkpoint: &Checkpoint,
    samples: &[crate::data::Sample],
    out_path: &Path,
) -> Result<usize, ExperimentError> {
    #[derive(Serialize)]
    struct AssignRecord<'a> {
        id: &'a str,
        cluster: usize,
        known_intent_flag: bool,
    }
    let bank = checkpoint.bank.as_ref().ok_or_else(|| {
        ExperimentError::Validation("checkpoint has no prototype bank; train first".into())
    })?;
    let mut lines = Vec::new();
    if !samples.is_empty() {
        let feats = crate::encoder::batch_matrix(samples.iter().map(|s| &s.features))
            .map_err(TrainError::from)?;
        if feats.ncols() != checkpoint.input_dim {
            return Err(ExperimentError::Validation(format!(
                "corpus feature dim {} does not match checkpoint input dim {}",
                feats.ncols(),
                checkpoint.input_dim
            )));
        }
        let reps = checkpoint.encoder.encode(&feats).map_err(TrainError::from)?;
        let logits = reps.dot(&bank.prototypes.t());
        let clusters = crate::assignment::argmax_rows(&logits.view());
        for (sample, &cluster) in samples.iter().zip(&clusters) {
            let record = AssignRecord {
                id: &sample.id,
                cluster,
                known_intent_flag: cluster < bank.known,
            };
            lines.push(serde_json::to_string(&record).expect("record serialization"));
        }
    }
    let mut body = lines.join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    std::fs::write(out_path, body).map_err(|e| io_err(out_path, e))?;
    Ok(samples.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            data: DataConfig::Synth {
                profile: None,
                blob: Some(BlobSpec {
                    clusters: 4,
                    per_cluster: 30,
                    dim: 6,
                    sigma: 0.5,
                    seed: derive_seed(seed, "synth-corpus"),
                    ..BlobSpec::default()
                }),
            },
            split: SplitConfig {
                known_fraction: 0.5,
                labeled_ratio: 0.3,
            },
            eval: EvalConfig { test_fraction: 0.2 },
            train: TrainConfig {
                warmup_epochs: 3,
                cluster_epochs: 3,
                learning_rate: 5e-3,
                supervised_batch: 16,
                cluster_batch: 32,
                seed,
                encoder: crate::encoder::EncoderConfig {
                    hidden_dims: vec![16],
                    output_dim: 8,
                    ..Default::default()
                },
                ..TrainConfig::default()
            },
        }
    }

    #[test]
    fn run_emits_all_artifacts_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(5);
        let artifacts = run_experiment(&cfg, dir.path()).unwrap();
        for name in [
            "metrics.json",
            "manifest.json",
            "report.txt",
            "checkpoint_warmup.json",
            "checkpoint_final.json",
            "train.jsonl",
            "test.jsonl",
        ] {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }
        assert!(in_unit(artifacts.metrics.acc));
        assert_eq!(artifacts.manifest.num_intents, 4);
        assert_eq!(artifacts.manifest.known_intents, 2);
    }

    #[test]
    fn zero_epoch_run_reproduces_the_init_encoder_baseline() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(6);
        cfg.train.warmup_epochs = 0;
        cfg.train.cluster_epochs = 0;
        let artifacts = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(
            artifacts.manifest.final_metrics,
            artifacts.manifest.baseline_init_encoder
        );
    }

    #[test]
    fn rerun_from_manifest_config_is_bit_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let artifacts = run_experiment(&tiny_config(7), dir_a.path()).unwrap();
        // Round-trip the config through the manifest and run again.
        let manifest_text = std::fs::read_to_string(dir_a.path().join("manifest.json")).unwrap();
        let manifest: RunManifest = serde_json::from_str(&manifest_text).unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let again = run_experiment(&manifest.config, dir_b.path()).unwrap();
        assert_eq!(artifacts.metrics, again.metrics);
        let bytes_a = std::fs::read(dir_a.path().join("metrics.json")).unwrap();
        let bytes_b = std::fs::read(dir_b.path().join("metrics.json")).unwrap();
        assert_eq!(bytes_a, bytes_b);
    }

    #[test]
    fn checkpoint_round_trips_and_assigns_every_sample() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(8);
        run_experiment(&cfg, dir.path()).unwrap();
        let checkpoint = Checkpoint::load(&dir.path().join("checkpoint_final.json")).unwrap();
        let corpus = crate::data::read_corpus_jsonl(&dir.path().join("train.jsonl"), None).unwrap();
        let out = dir.path().join("assignments.jsonl");
        let count = assign_corpus(&checkpoint, corpus.samples(), &out).unwrap();
        assert_eq!(count, corpus.len());
        let text = std::fs::read_to_string(&out).unwrap();
        assert_eq!(text.lines().count(), corpus.len());
        // Every line round-trips with the expected fields.
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v.get("id").is_some());
            assert!(v["cluster"].as_u64().is_some());
            assert!(v["known_intent_flag"].as_bool().is_some());
        }
    }

    #[test]
    fn assigning_an_empty_corpus_writes_an_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        run_experiment(&tiny_config(9), dir.path()).unwrap();
        let checkpoint = Checkpoint::load(&dir.path().join("checkpoint_final.json")).unwrap();
        let out = dir.path().join("empty.jsonl");
        let count = assign_corpus(&checkpoint, &[], &out).unwrap();
        assert_eq!(count, 0);
        assert_eq!(std::fs::read_to_string(&out).unwrap(), "");
    }

    #[test]
    fn sweep_builds_the_grid_and_aggregates() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(10);
        cfg.train.warmup_epochs = 1;
        cfg.train.cluster_epochs = 1;
        let sweep = SweepConfig {
            fractions: vec![0.5, 0.75],
            seeds: vec![1, 2],
            include_ablation: false,
        };
        let report = run_sweep(&cfg, &sweep, dir.path(), 2).unwrap();
        assert_eq!(report.cells.len(), 4);
        assert!(report.table_markdown.contains("| 50% | full |"));
        assert!(report.table_markdown.contains("| 75% | full |"));
        assert!(dir.path().join("sweep.json").exists());
        assert!(dir.path().join("report.md").exists());
    }

    #[test]
    fn empty_sweep_fraction_list_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let sweep = SweepConfig {
            fractions: vec![],
            seeds: vec![1],
            include_ablation: false,
        };
        assert!(matches!(
            run_sweep(&tiny_config(11), &sweep, dir.path(), 1),
            Err(ExperimentError::Config(_))
        ));
    }
}
