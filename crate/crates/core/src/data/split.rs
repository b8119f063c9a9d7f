//! Known-intent / labeled-subset splitting.
//!
//! A split chooses `K = floor(known_fraction * G)` intents as known, keeps a
//! `labeled_ratio` fraction of each known intent's samples as the labeled
//! subset, and hides all remaining labels. Hidden labels are retained behind
//! [`HiddenLabel`] so evaluation can score against them while training code
//! only ever sees ids and features.

use super::{Corpus, DataError, Features};
use crate::seed::stream_rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of intents treated as known, in (0, 1].
    pub known_fraction: f64,
    /// Fraction of each known intent's samples kept labeled, in (0, 1].
    pub labeled_ratio: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if !(self.known_fraction > 0.0 && self.known_fraction <= 1.0) {
            return Err(DataError::InvalidSpec(format!(
                "known_fraction {} not in (0, 1]",
                self.known_fraction
            )));
        }
        if !(self.labeled_ratio > 0.0 && self.labeled_ratio <= 1.0) {
            return Err(DataError::InvalidSpec(format!(
                "labeled_ratio {} not in (0, 1]",
                self.labeled_ratio
            )));
        }
        Ok(())
    }
}

/// A training sample whose (relabeled) intent is visible to the trainer.
#[derive(Debug, Clone)]
pub struct LabeledSample {
    pub id: String,
    pub features: Features,
    /// Contiguous relabeled intent id in `[0, K)`.
    pub label: usize,
}

/// Ground truth kept aside for metric computation only. The inner label is
/// private; training code holding an [`UnlabeledSample`] cannot read it.
#[derive(Debug, Clone)]
pub struct HiddenLabel(Option<usize>);

impl HiddenLabel {
    pub fn reveal_for_eval(&self) -> Option<usize> {
        self.0
    }
}

/// A training sample stripped of its label.
#[derive(Debug, Clone)]
pub struct UnlabeledSample {
    pub id: String,
    pub features: Features,
    pub hidden: HiddenLabel,
}

/// Result of splitting a training corpus.
#[derive(Debug, Clone)]
pub struct SplitResult {
    pub labeled: Vec<LabeledSample>,
    pub unlabeled: Vec<UnlabeledSample>,
    /// Number of known intents K.
    pub known_intents: usize,
    /// Total intent count G.
    pub num_intents: usize,
    /// Bijection original intent id -> contiguous id, known intents first.
    pub intent_relabeling: BTreeMap<usize, usize>,
}

impl SplitResult {
    pub fn train_len(&self) -> usize {
        self.labeled.len() + self.unlabeled.len()
    }

    /// Relabel an original intent id through the split's bijection.
    pub fn relabel(&self, original: usize) -> Option<usize> {
        self.intent_relabeling.get(&original).copied()
    }
}

/// Split a corpus into a labeled subset of known intents and an unlabeled
/// pool covering everything else.
pub fn split_corpus(corpus: &Corpus, spec: &SplitSpec) -> Result<SplitResult, DataError> {
    spec.validate()?;
    let g = corpus.num_intents();
    if g < 2 {
        return Err(DataError::MalformedCorpus(format!(
            "need at least 2 intents, corpus declares {g}"
        )));
    }
    let counts = corpus.intent_counts();
    for (intent, &count) in counts.iter().enumerate() {
        if count < 2 {
            if count == 0 {
                return Err(DataError::MalformedCorpus(format!(
                    "intent {intent} has zero samples"
                )));
            }
            return Err(DataError::IntentTooSmall { intent, count });
        }
    }
    let k = (spec.known_fraction * g as f64).floor() as usize;
    if k < 1 {
        return Err(DataError::InvalidSpec(format!(
            "known_fraction {} of {g} intents yields no known intent",
            spec.known_fraction
        )));
    }

    let mut rng = stream_rng(spec.seed, "split-known-intents");
    let mut intent_ids: Vec<usize> = (0..g).collect();
    intent_ids.shuffle(&mut rng);
    let mut known: Vec<usize> = intent_ids[..k].to_vec();
    known.sort_unstable();
    let mut unknown: Vec<usize> = intent_ids[k..].to_vec();
    unknown.sort_unstable();

    let mut relabeling = BTreeMap::new();
    for (new_id, &orig) in known.iter().chain(unknown.iter()).enumerate() {
        relabeling.insert(orig, new_id);
    }

    // Choose the labeled subset inside each known intent.
    let mut label_rng = stream_rng(spec.seed, "split-labeled-subset");
    let mut keep_labeled: Vec<bool> = vec![false; corpus.len()];
    for &intent in &known {
        let member_idx: Vec<usize> = corpus
            .samples()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == Some(intent))
            .map(|(i, _)| i)
            .collect();
        let want = ((spec.labeled_ratio * member_idx.len() as f64).round() as usize).max(1);
        let want = want.min(member_idx.len());
        let mut shuffled = member_idx;
        shuffled.shuffle(&mut label_rng);
        for &i in &shuffled[..want] {
            keep_labeled[i] = true;
        }
    }

    let mut labeled = Vec::new();
    let mut unlabeled = Vec::new();
    for (i, s) in corpus.samples().iter().enumerate() {
        let relabeled = s.label.map(|l| relabeling[&l]);
        if keep_labeled[i] {
            labeled.push(LabeledSample {
                id: s.id.clone(),
                features: s.features.clone(),
                label: relabeled.expect("labeled sample must carry a label"),
            });
        } else {
            unlabeled.push(UnlabeledSample {
                id: s.id.clone(),
                features: s.features.clone(),
                hidden: HiddenLabel(relabeled),
            });
        }
    }

    Ok(SplitResult {
        labeled,
        unlabeled,
        known_intents: k,
        num_intents: g,
        intent_relabeling: relabeling,
    })
}

/// Stratified train/test holdout. Per intent, `test_fraction` of the samples
/// (rounded, capped so at least one stays in train) move to the test corpus.
pub fn train_test_split(
    corpus: &Corpus,
    test_fraction: f64,
    seed: u64,
) -> Result<(Corpus, Corpus), DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::InvalidSpec(format!(
            "test_fraction {test_fraction} not in (0, 1)"
        )));
    }
    let mut rng = stream_rng(seed, "train-test-split");
    let mut in_test = vec![false; corpus.len()];
    for intent in 0..corpus.num_intents() {
        let member_idx: Vec<usize> = corpus
            .samples()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == Some(intent))
            .map(|(i, _)| i)
            .collect();
        if member_idx.is_empty() {
            continue;
        }
        let want = ((test_fraction * member_idx.len() as f64).round() as usize)
            .max(1)
            .min(member_idx.len() - 1);
        let mut shuffled = member_idx;
        shuffled.shuffle(&mut rng);
        for &i in &shuffled[..want] {
            in_test[i] = true;
        }
    }
    // Unlabeled samples stay in train.
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, s) in corpus.samples().iter().enumerate() {
        if in_test[i] {
            test.push(s.clone());
        } else {
            train.push(s.clone());
        }
    }
    let g = corpus.num_intents();
    Ok((Corpus::new(train, g)?, Corpus::new(test, g)?))
}
