//! Synthetic intent-corpus generator: labeled Gaussian blobs at desk scale.

use crate::data::{Corpus, Features, Sample};
use crate::seed::stream_rng;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid blob spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
}

/// Token-sequence emission: each sample becomes `min_len..=max_len` noisy
/// copies of its vector, exercising the encoder's mean pooling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenMode {
    pub min_len: usize,
    pub max_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlobSpec {
    pub clusters: usize,
    pub per_cluster: usize,
    pub dim: usize,
    /// Side length of the hypercube the cluster centers are drawn from.
    pub center_scale: f64,
    pub sigma: f64,
    pub seed: u64,
    pub token_mode: Option<TokenMode>,
    /// Anisotropic per-cluster noise and a halved center hypercube, for
    /// stress tests with overlapping clusters.
    pub hard_mode: bool,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            clusters: 10,
            per_cluster: 200,
            dim: 16,
            center_scale: 10.0,
            sigma: 0.5,
            seed: 0,
            token_mode: None,
            hard_mode: false,
        }
    }
}

impl BlobSpec {
    fn validate(&self) -> Result<(), SynthError> {
        if self.clusters == 0 || self.per_cluster == 0 || self.dim == 0 {
            return Err(SynthError::InvalidSpec("counts must be positive".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(SynthError::InvalidSpec(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if let Some(tm) = self.token_mode {
            if tm.min_len == 0 || tm.max_len < tm.min_len {
                return Err(SynthError::InvalidSpec(format!(
                    "bad token length range {}..={}",
                    tm.min_len, tm.max_len
                )));
            }
        }
        Ok(())
    }
}

/// Generate a fully labeled corpus of isotropic (or hard-mode anisotropic)
/// Gaussian blobs with centers drawn uniformly in a hypercube.
pub fn generate(spec: &BlobSpec) -> Result<Corpus, SynthError> {
    generate_with_centers(spec).map(|(corpus, _)| corpus)
}

/// Like [`generate`] but also returns the true cluster centers.
pub fn generate_with_centers(spec: &BlobSpec) -> Result<(Corpus, Vec<Vec<f64>>), SynthError> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, "synth-blobs");
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let scale = if spec.hard_mode {
        spec.center_scale / 2.0
    } else {
        spec.center_scale
    };
    let half = scale / 2.0;

    // Centers must be pairwise distinct; collisions are practically
    // impossible but resampled anyway.
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(spec.clusters);
    let min_sep = 1e-9 * scale.max(1.0);
    for _ in 0..spec.clusters {
        loop {
            let c: Vec<f64> = (0..spec.dim).map(|_| rng.gen_range(-half..half)).collect();
            let distinct = centers.iter().all(|prev| {
                let d2: f64 = prev.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
                d2.sqrt() > min_sep
            });
            if distinct {
                centers.push(c);
                break;
            }
        }
    }

    let axis_scales: Vec<Vec<f64>> = (0..spec.clusters)
        .map(|_| {
            (0..spec.dim)
                .map(|_| {
                    if spec.hard_mode {
                        rng.gen_range(0.5..2.5)
                    } else {
                        1.0
                    }
                })
                .collect()
        })
        .collect();

    let mut samples = Vec::with_capacity(spec.clusters * spec.per_cluster);
    for (cluster, center) in centers.iter().enumerate() {
        for j in 0..spec.per_cluster {
            let point: Vec<f64> = (0..spec.dim)
                .map(|d| center[d] + spec.sigma * axis_scales[cluster][d] * normal.sample(&mut rng))
                .collect();
            let features = match spec.token_mode {
                None => Features::Vector(point),
                Some(tm) => {
                    let len = rng.gen_range(tm.min_len..=tm.max_len);
                    let tokens: Vec<Vec<f64>> = (0..len)
                        .map(|_| {
                            point
                                .iter()
                                .map(|&x| x + spec.sigma * normal.sample(&mut rng))
                                .collect()
                        })
                        .collect();
                    Features::Tokens(tokens)
                }
            };
            samples.push(Sample {
                id: format!("c{cluster:03}-s{j:04}"),
                features,
                label: Some(cluster),
            });
        }
    }
    Ok((Corpus::new(samples, spec.clusters)?, centers))
}
