//! Corpus representation, the known-intent split protocol, and the
//! alternating batch scheduler.

mod io;
mod schedule;
mod split;

pub use io::{
    canonical_jsonl, read_corpus_csv, read_corpus_jsonl, read_samples_jsonl, write_samples_jsonl,
};
pub use schedule::{BatchMode, BatchSchedule, Phase};
pub use split::{
    split_corpus, train_test_split, HiddenLabel, LabeledSample, SplitResult, SplitSpec,
    UnlabeledSample,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("sample {id}: {reason}")]
    MalformedSample { id: String, reason: String },
    #[error("malformed corpus: {0}")]
    MalformedCorpus(String),
    #[error("intent {intent} has {count} samples, need at least 2")]
    IntentTooSmall { intent: usize, count: usize },
    #[error("invalid split spec: {0}")]
    InvalidSpec(String),
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path} line {line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },
}

/// Per-sample feature payload: either one fixed vector or a variable-length
/// sequence of token vectors that gets mean-pooled by the encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Features {
    Vector(Vec<f64>),
    Tokens(Vec<Vec<f64>>),
}

impl Features {
    /// Dimension of the (pooled) feature vector.
    pub fn dim(&self) -> usize {
        match self {
            Features::Vector(v) => v.len(),
            Features::Tokens(t) => t.first().map_or(0, Vec::len),
        }
    }

    fn validate(&self, id: &str) -> Result<(), DataError> {
        let malformed = |reason: &str| DataError::MalformedSample {
            id: id.to_string(),
            reason: reason.to_string(),
        };
        match self {
            Features::Vector(v) => {
                if v.is_empty() {
                    return Err(malformed("empty feature vector"));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(malformed("non-finite feature value"));
                }
            }
            Features::Tokens(tokens) => {
                if tokens.is_empty() {
                    return Err(malformed("empty token sequence"));
                }
                let dim = tokens[0].len();
                if dim == 0 {
                    return Err(malformed("zero-dimensional token"));
                }
                for tok in tokens {
                    if tok.len() != dim {
                        return Err(malformed("ragged token dimensions"));
                    }
                    if tok.iter().any(|x| !x.is_finite()) {
                        return Err(malformed("non-finite token value"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One clusterable unit: opaque id, features, optional intent label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub features: Features,
    pub label: Option<usize>,
}

/// A validated collection of samples with a declared intent count.
#[derive(Debug, Clone)]
pub struct Corpus {
    samples: Vec<Sample>,
    num_intents: usize,
    feature_dim: usize,
}

impl Corpus {
    pub fn new(samples: Vec<Sample>, num_intents: usize) -> Result<Self, DataError> {
        if samples.is_empty() {
            return Err(DataError::MalformedCorpus("no samples".into()));
        }
        if num_intents == 0 {
            return Err(DataError::MalformedCorpus("num_intents must be >= 1".into()));
        }
        let feature_dim = samples[0].features.dim();
        for s in &samples {
            s.features.validate(&s.id)?;
            if s.features.dim() != feature_dim {
                return Err(DataError::MalformedSample {
                    id: s.id.clone(),
                    reason: format!(
                        "feature dim {} differs from corpus dim {feature_dim}",
                        s.features.dim()
                    ),
                });
            }
            if let Some(label) = s.label {
                if label >= num_intents {
                    return Err(DataError::MalformedSample {
                        id: s.id.clone(),
                        reason: format!("label {label} out of range for {num_intents} intents"),
                    });
                }
            }
        }
        Ok(Self {
            samples,
            num_intents,
            feature_dim,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn num_intents(&self) -> usize {
        self.num_intents
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of samples carrying each intent label.
    pub fn intent_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_intents];
        for s in &self.samples {
            if let Some(label) = s.label {
                counts[label] += 1;
            }
        }
        counts
    }
}
