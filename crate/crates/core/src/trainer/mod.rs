//! Two-stage dual-task training.
//!
//! Warm-up: alternate supervised steps (cross entropy + supervised
//! contrastive on labeled batches) with instance-contrastive steps on the
//! full training pool. Head init: K-Means++ over all training
//! representations, Hungarian-aligned to the warm-up classifier, re-sorted so
//! the matched centers land in rows `[0, K)`. Clustering stage: alternate
//! supervised steps (now against the shared classifier rows of the prototype
//! bank) with cluster steps that chase balanced Sinkhorn targets through the
//! swapped prediction loss plus a pseudo-label contrastive term. Evaluation
//! re-clusters held-out representations with K-Means++.

mod optim;

pub use optim::{AdamW, Moments};

use crate::assignment::{
    align_and_extract, argmax_rows, harden, kmeans_best_of, kmeans_pp, sinkhorn_assign,
    AssignmentError, PrototypeBank,
};
use crate::data::{BatchMode, BatchSchedule, Corpus, Phase, SplitResult};
use crate::encoder::{
    batch_matrix, normalize_rows, EncoderConfig, EncoderError, EncoderGradients, EncoderParams,
};
use crate::losses::{self, LossError, LossOutput};
use crate::metrics::{MetricReport, MetricsError};
use crate::seed::{derive_seed, stream_rng};
use ndarray::{Array2, ArrayView2};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("{stage} diverged at epoch {epoch}: {term} = {value}")]
    Diverged {
        stage: &'static str,
        epoch: usize,
        term: &'static str,
        value: f64,
    },
    #[error("cluster head not initialized; run the warm-up and head init first")]
    HeadNotInitialized,
    #[error("classifier already consumed by head initialization")]
    WarmupAfterHeadInit,
    #[error("{context}: need at least {needed} samples, have {available}")]
    InsufficientData {
        context: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("test sample {id} has no usable ground-truth label")]
    UnlabeledTestSample { id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub warmup_epochs: usize,
    pub cluster_epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub supervised_batch: usize,
    pub cluster_batch: usize,
    pub tau: f64,
    pub sinkhorn_epsilon: f64,
    pub sinkhorn_iterations: usize,
    pub seed: u64,
    /// Drop the supervised steps from the clustering stage.
    pub ablate_supervised_cluster: bool,
    pub encoder: EncoderConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            warmup_epochs: 100,
            cluster_epochs: 100,
            learning_rate: 5e-5,
            weight_decay: 0.01,
            supervised_batch: 128,
            cluster_batch: 512,
            tau: 0.07,
            sinkhorn_epsilon: 0.05,
            sinkhorn_iterations: 3,
            seed: 0,
            ablate_supervised_cluster: false,
            encoder: EncoderConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::InvalidConfig(msg));
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if self.weight_decay < 0.0 {
            return bad(format!("weight_decay {} must be nonnegative", self.weight_decay));
        }
        if self.supervised_batch < 2 || self.cluster_batch < 2 {
            return bad("batch sizes must be at least 2 for the contrastive terms".into());
        }
        if !(self.tau > 0.0) {
            return bad(format!("tau {} must be positive", self.tau));
        }
        if !(self.sinkhorn_epsilon > 0.0) {
            return bad(format!("sinkhorn_epsilon {} must be positive", self.sinkhorn_epsilon));
        }
        if self.sinkhorn_iterations == 0 {
            return bad("sinkhorn_iterations must be at least 1".into());
        }
        Ok(())
    }
}

/// Per-epoch mean of each warm-up loss term.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct WarmupEpochLosses {
    pub cross_entropy: f64,
    pub supervised_contrastive: f64,
    pub instance_contrastive: f64,
}

/// Per-epoch mean of each clustering-stage loss term.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct ClusterEpochLosses {
    pub swapped: f64,
    pub pseudo_contrastive: f64,
    pub cross_entropy: f64,
    pub supervised_contrastive: f64,
}

/// Every recorded loss value, per step and aggregated per epoch.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LossHistory {
    pub warmup_cross_entropy: Vec<f64>,
    pub warmup_supervised_contrastive: Vec<f64>,
    pub warmup_instance_contrastive: Vec<f64>,
    pub cluster_swapped: Vec<f64>,
    pub cluster_pseudo_contrastive: Vec<f64>,
    pub cluster_cross_entropy: Vec<f64>,
    pub cluster_supervised_contrastive: Vec<f64>,
    pub warmup_epochs: Vec<WarmupEpochLosses>,
    pub cluster_epochs: Vec<ClusterEpochLosses>,
}

impl LossHistory {
    pub fn all_finite(&self) -> bool {
        [
            &self.warmup_cross_entropy,
            &self.warmup_supervised_contrastive,
            &self.warmup_instance_contrastive,
            &self.cluster_swapped,
            &self.cluster_pseudo_contrastive,
            &self.cluster_cross_entropy,
            &self.cluster_supervised_contrastive,
        ]
        .iter()
        .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Training pools marshaled into matrices: the labeled pool and the full
/// pool (labeled rows first, then unlabeled).
#[derive(Debug, Clone)]
pub struct TrainPools {
    pub labeled_features: Array2<f64>,
    pub labels: Vec<usize>,
    pub full_features: Array2<f64>,
}

impl TrainPools {
    pub fn from_split(split: &SplitResult) -> Result<Self, TrainError> {
        let labeled_features =
            batch_matrix(split.labeled.iter().map(|s| &s.features)).map_err(TrainError::from)?;
        let labels: Vec<usize> = split.labeled.iter().map(|s| s.label).collect();
        let all = split
            .labeled
            .iter()
            .map(|s| &s.features)
            .chain(split.unlabeled.iter().map(|s| &s.features));
        let full_features = batch_matrix(all).map_err(TrainError::from)?;
        Ok(Self {
            labeled_features,
            labels,
            full_features,
        })
    }
}

fn gather_rows(m: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), m.ncols()));
    for (row, &i) in idx.iter().enumerate() {
        out.row_mut(row).assign(&m.row(i));
    }
    out
}

/// Mutable training state across the two stages. During the clustering stage
/// the known-intent classifier is literally rows `[0, K)` of the prototype
/// bank; there is no second copy.
#[derive(Debug)]
pub struct TrainState {
    pub encoder: EncoderParams,
    classifier: Option<Array2<f64>>,
    bank: Option<PrototypeBank>,
    known: usize,
    encoder_moments: Vec<(Moments, Moments)>,
    head_moments: Moments,
    dropout_rng: ChaCha8Rng,
    pub history: LossHistory,
    pub warnings: Vec<String>,
}

fn fresh_encoder_moments(encoder: &EncoderParams) -> Vec<(Moments, Moments)> {
    encoder
        .layers
        .iter()
        .map(|l| (Moments::new(l.weight.len()), Moments::new(l.bias.len())))
        .collect()
}

impl TrainState {
    /// Fresh state: seeded encoder with input standardization fitted on the
    /// full training pool, plus a seeded warm-up classifier of `known` rows.
    pub fn new(pools: &TrainPools, known: usize, config: &TrainConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let input_dim = pools.full_features.ncols();
        let mut encoder = EncoderParams::init(input_dim, &config.encoder, config.seed)?;
        encoder.fit_input_standardization(&pools.full_features);
        let d = encoder.output_dim();
        let mut rng = stream_rng(config.seed, "classifier-init");
        let bound = (6.0 / (known + d) as f64).sqrt();
        let classifier = Array2::from_shape_fn((known, d), |_| {
            use rand::Rng;
            rng.gen_range(-bound..bound)
        });
        let encoder_moments = fresh_encoder_moments(&encoder);
        Ok(Self {
            head_moments: Moments::new(classifier.len()),
            classifier: Some(classifier),
            bank: None,
            known,
            encoder_moments,
            dropout_rng: stream_rng(config.seed, "dropout"),
            encoder,
            history: LossHistory::default(),
            warnings: Vec::new(),
        })
    }

    pub fn known_intents(&self) -> usize {
        self.known
    }

    /// The known-intent classifier: the warm-up weight matrix before head
    /// init, the leading prototype rows afterwards.
    pub fn classifier_weights(&self) -> ArrayView2<'_, f64> {
        match (&self.classifier, &self.bank) {
            (Some(w), _) => w.view(),
            (None, Some(bank)) => bank.classifier(),
            (None, None) => unreachable!("state always has a classifier or a bank"),
        }
    }

    pub fn prototype_bank(&self) -> Option<&PrototypeBank> {
        self.bank.as_ref()
    }

    pub fn prototype_bank_mut(&mut self) -> Option<&mut PrototypeBank> {
        self.bank.as_mut()
    }

    pub fn set_bank_for_assignment(&mut self, bank: PrototypeBank) {
        self.known = bank.known;
        self.classifier = None;
        self.bank = Some(bank);
    }

    fn check_finite(
        &self,
        stage: &'static str,
        epoch: usize,
        term: &'static str,
        value: f64,
    ) -> Result<(), TrainError> {
        if value.is_finite() {
            Ok(())
        } else {
            Err(TrainError::Diverged {
                stage,
                epoch,
                term,
                value,
            })
        }
    }

    fn apply_encoder_update(&mut self, opt: &AdamW, grads: &EncoderGradients) {
        for ((layer, (mw, mb)), g) in self
            .encoder
            .layers
            .iter_mut()
            .zip(self.encoder_moments.iter_mut())
            .zip(&grads.layers)
        {
            opt.step(
                mw,
                layer.weight.as_slice_mut().expect("standard layout"),
                g.weight.as_slice().expect("standard layout"),
            );
            opt.step(
                mb,
                layer.bias.as_slice_mut().expect("standard layout"),
                g.bias.as_slice().expect("standard layout"),
            );
        }
    }

    fn apply_classifier_update(&mut self, opt: &AdamW, grad: &Array2<f64>) {
        let w = self.classifier.as_mut().expect("warm-up classifier present");
        opt.step(
            &mut self.head_moments,
            w.as_slice_mut().expect("standard layout"),
            grad.as_slice().expect("standard layout"),
        );
    }

    /// Full-bank update; gradients for steps that only touch the classifier
    /// rows arrive embedded in a bank-shaped matrix of zeros. Prototype
    /// norms are free to grow so the cluster logits can sharpen.
    fn apply_bank_update(&mut self, opt: &AdamW, grad: &Array2<f64>) {
        let bank = self.bank.as_mut().expect("bank present");
        opt.step(
            &mut self.head_moments,
            bank.prototypes.as_slice_mut().expect("standard layout"),
            grad.as_slice().expect("standard layout"),
        );
    }
}

fn epoch_mean(values: &[f64], from: usize) -> f64 {
    let slice = &values[from..];
    if slice.is_empty() {
        0.0
    } else {
        slice.iter().sum::<f64>() / slice.len() as f64
    }
}

/// Warm-up stage: dual-task training of the encoder and the warm-up
/// classifier.
pub fn warmup_stage(
    state: &mut TrainState,
    config: &TrainConfig,
    pools: &TrainPools,
) -> Result<(), TrainError> {
    config.validate()?;
    if state.classifier.is_none() {
        return Err(TrainError::WarmupAfterHeadInit);
    }
    if config.warmup_epochs == 0 {
        return Ok(());
    }
    let opt = AdamW::new(config.learning_rate, config.weight_decay);
    let mut schedule = BatchSchedule::new(
        pools.labels.len(),
        pools.full_features.nrows(),
        config.supervised_batch,
        config.cluster_batch,
        derive_seed(config.seed, "batch-warmup"),
    );
    if schedule.unsupervised_only {
        state
            .warnings
            .push("warm-up has no labeled samples; supervised steps skipped".into());
    }
    for epoch in 0..config.warmup_epochs {
        let pairs = schedule.pairs_per_epoch(Phase::Warmup);
        let steps = if schedule.unsupervised_only { pairs } else { 2 * pairs };
        let (ce_from, sc_from, un_from) = (
            state.history.warmup_cross_entropy.len(),
            state.history.warmup_supervised_contrastive.len(),
            state.history.warmup_instance_contrastive.len(),
        );
        for _ in 0..steps {
            let (mode, idx) = schedule.next_batch(Phase::Warmup);
            match mode {
                BatchMode::Supervised => {
                    let feats = gather_rows(&pools.labeled_features, &idx);
                    let labels: Vec<usize> = idx.iter().map(|&i| pools.labels[i]).collect();
                    let (views, cache) = state
                        .encoder
                        .forward_two_views(&feats, &mut state.dropout_rng)?;
                    let w = state.classifier.as_ref().expect("checked above");
                    let ce = losses::cross_entropy(&views.z, &labels, w)?;
                    let sc = losses::supervised_contrastive(&views, &labels, config.tau)?;
                    state.check_finite("warm-up", epoch, "cross_entropy", ce.value)?;
                    state.check_finite("warm-up", epoch, "supervised_contrastive", sc.value)?;
                    let total = losses::compose(&[&ce, &sc])?;
                    let grads = state.encoder.backward(&cache, &total.grad_z, &total.grad_z_prime);
                    state.apply_encoder_update(&opt, &grads);
                    let gw = total.grad_weights.expect("cross entropy has weight grads");
                    state.apply_classifier_update(&opt, &gw);
                    state.history.warmup_cross_entropy.push(ce.value);
                    state.history.warmup_supervised_contrastive.push(sc.value);
                }
                BatchMode::Unsupervised => {
                    let feats = gather_rows(&pools.full_features, &idx);
                    let (views, cache) = state
                        .encoder
                        .forward_two_views(&feats, &mut state.dropout_rng)?;
                    let loss = losses::unsupervised_contrastive(&views, config.tau)?;
                    state.check_finite("warm-up", epoch, "instance_contrastive", loss.value)?;
                    let grads = state.encoder.backward(&cache, &loss.grad_z, &loss.grad_z_prime);
                    state.apply_encoder_update(&opt, &grads);
                    state.history.warmup_instance_contrastive.push(loss.value);
                }
            }
        }
        state.history.warmup_epochs.push(WarmupEpochLosses {
            cross_entropy: epoch_mean(&state.history.warmup_cross_entropy, ce_from),
            supervised_contrastive: epoch_mean(
                &state.history.warmup_supervised_contrastive,
                sc_from,
            ),
            instance_contrastive: epoch_mean(
                &state.history.warmup_instance_contrastive,
                un_from,
            ),
        });
    }
    Ok(())
}

/// Initialize the prototype bank: K-Means++ over all training
/// representations, aligned to the warm-up classifier so the matched centers
/// occupy the classifier rows. The warm-up classifier is consumed; from here
/// on it aliases the bank.
pub fn init_cluster_head(
    state: &mut TrainState,
    config: &TrainConfig,
    pools: &TrainPools,
    num_intents: usize,
) -> Result<(), TrainError> {
    let available = pools.full_features.nrows();
    if available < num_intents {
        return Err(TrainError::InsufficientData {
            context: "cluster head init",
            needed: num_intents,
            available,
        });
    }
    let reps = state.encoder.encode(&pools.full_features)?;
    let fit = kmeans_pp(
        &reps,
        num_intents,
        derive_seed(config.seed, "head-kmeans"),
        100,
    )?;
    let centers = if config.encoder.normalize_output {
        normalize_rows(&fit.centers)
    } else {
        fit.centers
    };
    let w = state.classifier.take().ok_or(TrainError::WarmupAfterHeadInit)?;
    let bank = align_and_extract(&w, &centers)?;
    state.known = bank.known;
    state.head_moments = Moments::new(bank.prototypes.len());
    state.encoder_moments = fresh_encoder_moments(&state.encoder);
    state.bank = Some(bank);
    Ok(())
}

/// Clustering stage: swapped prediction against balanced soft assignments
/// plus pseudo-label contrastive training, interleaved with supervised steps
/// on the shared classifier rows unless ablated.
pub fn clustering_stage(
    state: &mut TrainState,
    config: &TrainConfig,
    pools: &TrainPools,
) -> Result<(), TrainError> {
    config.validate()?;
    if state.bank.is_none() {
        return Err(TrainError::HeadNotInitialized);
    }
    if config.cluster_epochs == 0 {
        return Ok(());
    }
    let opt = AdamW::new(config.learning_rate, config.weight_decay);
    let mut schedule = BatchSchedule::new(
        pools.labels.len(),
        pools.full_features.nrows(),
        config.supervised_batch,
        config.cluster_batch,
        derive_seed(config.seed, "batch-cluster"),
    );
    let mut warned_small_batch = false;
    for epoch in 0..config.cluster_epochs {
        let pairs = schedule.pairs_per_epoch(Phase::Cluster);
        let steps = if schedule.unsupervised_only { pairs } else { 2 * pairs };
        let (sw_from, ps_from, ce_from, sc_from) = (
            state.history.cluster_swapped.len(),
            state.history.cluster_pseudo_contrastive.len(),
            state.history.cluster_cross_entropy.len(),
            state.history.cluster_supervised_contrastive.len(),
        );
        for _ in 0..steps {
            let (mode, idx) = schedule.next_batch(Phase::Cluster);
            match mode {
                BatchMode::Supervised => {
                    if config.ablate_supervised_cluster {
                        continue;
                    }
                    let feats = gather_rows(&pools.labeled_features, &idx);
                    let labels: Vec<usize> = idx.iter().map(|&i| pools.labels[i]).collect();
                    let (views, cache) = state
                        .encoder
                        .forward_two_views(&feats, &mut state.dropout_rng)?;
                    let bank = state.bank.as_ref().expect("checked above");
                    let ce = losses::prototype_cross_entropy(
                        &views.z,
                        &labels,
                        &bank.prototypes,
                        bank.known,
                    )?;
                    let sc = losses::supervised_contrastive(&views, &labels, config.tau)?;
                    state.check_finite("clustering", epoch, "cross_entropy", ce.value)?;
                    state.check_finite("clustering", epoch, "supervised_contrastive", sc.value)?;
                    let total = losses::compose(&[&ce, &sc])?;
                    let grads = state.encoder.backward(&cache, &total.grad_z, &total.grad_z_prime);
                    state.apply_encoder_update(&opt, &grads);
                    let gw = total.grad_weights.expect("prototype ce has weight grads");
                    state.apply_bank_update(&opt, &gw);
                    state.history.cluster_cross_entropy.push(ce.value);
                    state.history.cluster_supervised_contrastive.push(sc.value);
                }
                BatchMode::Unsupervised => {
                    let feats = gather_rows(&pools.full_features, &idx);
                    let small_batch = feats.nrows() < 2;
                    if small_batch && !warned_small_batch {
                        warned_small_batch = true;
                        state.warnings.push(
                            "cluster batch of one sample; pseudo-label contrastive term skipped"
                                .into(),
                        );
                    }
                    let (views, cache) = state
                        .encoder
                        .forward_two_views(&feats, &mut state.dropout_rng)?;
                    let bank = state.bank.as_ref().expect("checked above");
                    let (q, q_prime) = losses::cluster_logits(&views, &bank.prototypes)?;
                    // Balanced targets are constants: no gradient flows back
                    // through the assignment.
                    let soft = sinkhorn_assign(&q, config.sinkhorn_epsilon, config.sinkhorn_iterations)?;
                    let soft_prime =
                        sinkhorn_assign(&q_prime, config.sinkhorn_epsilon, config.sinkhorn_iterations)?;
                    let swapped = losses::sinkhorn_swapped_loss(
                        &views,
                        &bank.prototypes,
                        &soft.probabilities,
                        &soft_prime.probabilities,
                    )?;
                    state.check_finite("clustering", epoch, "swapped", swapped.value)?;
                    let pseudo = if small_batch {
                        LossOutput::zero_like(&views)
                    } else {
                        let mut pseudo_labels = harden(&soft).labels;
                        pseudo_labels.extend(harden(&soft_prime).labels);
                        losses::pseudo_supervised_contrastive(&views, &pseudo_labels, config.tau)?
                    };
                    state.check_finite("clustering", epoch, "pseudo_contrastive", pseudo.value)?;
                    let total = losses::compose(&[&swapped, &pseudo])?;
                    let grads = state.encoder.backward(&cache, &total.grad_z, &total.grad_z_prime);
                    state.apply_encoder_update(&opt, &grads);
                    let gw = total.grad_weights.expect("swapped loss has prototype grads");
                    state.apply_bank_update(&opt, &gw);
                    state.history.cluster_swapped.push(swapped.value);
                    state.history.cluster_pseudo_contrastive.push(pseudo.value);
                }
            }
        }
        state.history.cluster_epochs.push(ClusterEpochLosses {
            swapped: epoch_mean(&state.history.cluster_swapped, sw_from),
            pseudo_contrastive: epoch_mean(&state.history.cluster_pseudo_contrastive, ps_from),
            cross_entropy: epoch_mean(&state.history.cluster_cross_entropy, ce_from),
            supervised_contrastive: epoch_mean(
                &state.history.cluster_supervised_contrastive,
                sc_from,
            ),
        });
    }
    Ok(())
}

/// Restarts used whenever K-Means++ produces final predictions; the best
/// fit by inertia wins.
pub const EVAL_RESTARTS: usize = 10;

/// Metrics of the evaluation protocol plus the secondary head-argmax view.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvalReport {
    pub kmeans: MetricReport,
    pub head_argmax: Option<MetricReport>,
}

/// Relabeled ground truth of a (fully labeled) evaluation corpus.
pub fn relabeled_truth(test: &Corpus, split: &SplitResult) -> Result<Vec<usize>, TrainError> {
    test.samples()
        .iter()
        .map(|s| {
            s.label
                .and_then(|l| split.relabel(l))
                .ok_or_else(|| TrainError::UnlabeledTestSample { id: s.id.clone() })
        })
        .collect()
}

/// Encode a held-out corpus, re-cluster with K-Means++, and score against
/// hidden ground truth. When the prototype bank exists, argmax over its
/// logits is reported as a secondary column.
pub fn evaluate(
    state: &TrainState,
    config: &TrainConfig,
    test: &Corpus,
    split: &SplitResult,
) -> Result<EvalReport, TrainError> {
    let g = split.num_intents;
    if test.len() < g {
        return Err(TrainError::InsufficientData {
            context: "evaluation",
            needed: g,
            available: test.len(),
        });
    }
    let feats = batch_matrix(test.samples().iter().map(|s| &s.features))?;
    let reps = state.encoder.encode(&feats)?;
    let truth = relabeled_truth(test, split)?;
    let fit = kmeans_best_of(&reps, g, derive_seed(config.seed, "eval-kmeans"), 300, EVAL_RESTARTS)?;
    let kmeans = MetricReport::compute(&fit.labels, &truth)?;
    let head_argmax = match state.bank.as_ref() {
        Some(bank) => {
            let logits = reps.dot(&bank.prototypes.t());
            let pred = argmax_rows(&logits.view());
            Some(MetricReport::compute(&pred, &truth)?)
        }
        None => None,
    };
    Ok(EvalReport { kmeans, head_argmax })
}

/// Fraction of labeled samples whose classifier argmax matches their label
/// (dropout off).
pub fn classification_accuracy(state: &TrainState, pools: &TrainPools) -> Result<f64, TrainError> {
    if pools.labels.is_empty() {
        return Ok(0.0);
    }
    let reps = state.encoder.encode(&pools.labeled_features)?;
    let logits = reps.dot(&state.classifier_weights().t());
    let pred = argmax_rows(&logits.view());
    let hits = pred
        .iter()
        .zip(&pools.labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / pools.labels.len() as f64)
}

/// K-Means++ metrics directly on raw (pooled) input features; the baseline
/// the trained pipeline has to beat.
pub fn raw_feature_baseline(
    test: &Corpus,
    split: &SplitResult,
    seed: u64,
) -> Result<MetricReport, TrainError> {
    let feats = batch_matrix(test.samples().iter().map(|s| &s.features))?;
    let truth = relabeled_truth(test, split)?;
    let fit = kmeans_best_of(
        &feats,
        split.num_intents,
        derive_seed(seed, "raw-kmeans"),
        300,
        EVAL_RESTARTS,
    )?;
    Ok(MetricReport::compute(&fit.labels, &truth)?)
}
