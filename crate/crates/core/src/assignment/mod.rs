//! Balanced soft pseudo-assignment (Sinkhorn-Knopp), K-Means++ clustering,
//! exact Hungarian matching, and classifier/center alignment.

mod hungarian;
mod kmeans;
mod sinkhorn;

pub use hungarian::hungarian;
pub use kmeans::{kmeans_best_of, kmeans_pp, KMeansFit};
pub use sinkhorn::{sinkhorn_assign, sinkhorn_converged, SoftAssignment};

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssignmentError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("numeric failure in sinkhorn iteration {iteration}: {reason}")]
    Numeric { iteration: usize, reason: String },
    #[error("{needed} clusters requested but only {available} points available")]
    InsufficientData { needed: usize, available: usize },
    #[error("cost matrix has {rows} rows and {cols} columns; rows must not exceed columns")]
    ShapeError { rows: usize, cols: usize },
    #[error("non-finite cost at ({row}, {col})")]
    NonFiniteCost { row: usize, col: usize },
    #[error("row {0} has zero norm")]
    DegenerateVector(usize),
}

/// Hard cluster labels obtained by row-wise argmax.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HardAssignment {
    pub labels: Vec<usize>,
}

/// Row-wise argmax with first-index tie-break.
pub fn argmax_rows(m: &ArrayView2<f64>) -> Vec<usize> {
    m.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            let mut best_val = f64::NEG_INFINITY;
            for (j, &v) in row.iter().enumerate() {
                if v > best_val {
                    best_val = v;
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Hard pseudo labels from a soft assignment.
pub fn harden(soft: &SoftAssignment) -> HardAssignment {
    HardAssignment {
        labels: argmax_rows(&soft.probabilities.view()),
    }
}

/// The shared weight matrix of cluster centers. Rows `[0, known)` double as
/// the known-intent classifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrototypeBank {
    pub prototypes: Array2<f64>,
    pub known: usize,
}

impl PrototypeBank {
    pub fn num_clusters(&self) -> usize {
        self.prototypes.nrows()
    }

    pub fn dim(&self) -> usize {
        self.prototypes.ncols()
    }

    /// View of the classifier rows.
    pub fn classifier(&self) -> ArrayView2<'_, f64> {
        self.prototypes.slice(s![..self.known, ..])
    }
}

fn cosine_cost(w: &Array2<f64>, centers: &Array2<f64>) -> Result<Array2<f64>, AssignmentError> {
    let norms = |m: &Array2<f64>| -> Result<Vec<f64>, AssignmentError> {
        m.rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                let n = row.dot(&row).sqrt();
                if n == 0.0 {
                    Err(AssignmentError::DegenerateVector(i))
                } else {
                    Ok(n)
                }
            })
            .collect()
    };
    let wn = norms(w)?;
    let cn = norms(centers)?;
    let mut cost = w.dot(&centers.t());
    for i in 0..cost.nrows() {
        for j in 0..cost.ncols() {
            cost[[i, j]] = 1.0 - cost[[i, j]] / (wn[i] * cn[j]);
        }
    }
    Ok(cost)
}

/// Match classifier rows to their most similar cluster centers (minimum
/// total cosine distance) and re-sort the centers so the matched ones occupy
/// the leading rows in classifier order, with the remaining centers after
/// them in their original order.
pub fn align_and_extract(
    w: &Array2<f64>,
    raw_centers: &Array2<f64>,
) -> Result<PrototypeBank, AssignmentError> {
    let k = w.nrows();
    let g = raw_centers.nrows();
    if k > g {
        return Err(AssignmentError::ShapeError { rows: k, cols: g });
    }
    if w.ncols() != raw_centers.ncols() {
        return Err(AssignmentError::InvalidParameter(format!(
            "classifier dim {} vs center dim {}",
            w.ncols(),
            raw_centers.ncols()
        )));
    }
    let cost = cosine_cost(w, raw_centers)?;
    let matching = hungarian(&cost)?;
    let mut prototypes = Array2::zeros((g, raw_centers.ncols()));
    let mut taken = vec![false; g];
    for (i, &j) in matching.iter().enumerate() {
        prototypes.row_mut(i).assign(&raw_centers.row(j));
        taken[j] = true;
    }
    let mut next = k;
    for (j, &used) in taken.iter().enumerate() {
        if !used {
            prototypes.row_mut(next).assign(&raw_centers.row(j));
            next += 1;
        }
    }
    Ok(PrototypeBank {
        prototypes,
        known: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream_rng;
    use ndarray::arr2;
    use rand::Rng;

    #[test]
    fn harden_picks_argmax_with_first_index_tie_break() {
        let soft = SoftAssignment {
            probabilities: arr2(&[
                [0.0, 1.0, 0.0],
                [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
                [0.2, 0.5, 0.3],
            ]),
            iterations_used: 1,
            epsilon: 1.0,
            underfilled: false,
        };
        assert_eq!(harden(&soft).labels, vec![1, 0, 1]);
    }

    #[test]
    fn aligning_exact_subset_recovers_it_in_order() {
        let centers = arr2(&[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]);
        let w = arr2(&[[0.0, 2.0], [-3.0, 0.0]]); // scaled rows 1 and 2
        let bank = align_and_extract(&w, &centers).unwrap();
        assert_eq!(bank.known, 2);
        assert_eq!(bank.prototypes.row(0), centers.row(1));
        assert_eq!(bank.prototypes.row(1), centers.row(2));
        assert_eq!(bank.prototypes.row(2), centers.row(0));
    }

    #[test]
    fn full_matching_is_a_permutation_of_the_centers() {
        let mut rng = stream_rng(5, "align");
        let centers = Array2::from_shape_fn((4, 3), |_| rng.gen_range(-1.0..1.0));
        let w = Array2::from_shape_fn((4, 3), |_| rng.gen_range(-1.0..1.0));
        let bank = align_and_extract(&w, &centers).unwrap();
        let mut found = vec![false; 4];
        for i in 0..4 {
            let row = bank.prototypes.row(i);
            let j = (0..4)
                .find(|&j| centers.row(j) == row)
                .expect("each output row is some center");
            found[j] = true;
        }
        assert!(found.iter().all(|&f| f));
    }

    #[test]
    fn alignment_matches_brute_force_over_injective_maps() {
        for seed in 0..20u64 {
            let mut rng = stream_rng(seed, "align-brute");
            let w = Array2::from_shape_fn((2, 3), |_| rng.gen_range(-1.0..1.0));
            let centers = Array2::from_shape_fn((3, 3), |_| rng.gen_range(-1.0..1.0));
            let bank = align_and_extract(&w, &centers).unwrap();
            let cost = cosine_cost(&w, &centers).unwrap();
            let mut best = f64::INFINITY;
            let mut best_map = (0, 0);
            for a in 0..3 {
                for b in 0..3 {
                    if a == b {
                        continue;
                    }
                    let total = cost[[0, a]] + cost[[1, b]];
                    if total < best {
                        best = total;
                        best_map = (a, b);
                    }
                }
            }
            assert_eq!(bank.prototypes.row(0), centers.row(best_map.0), "seed {seed}");
            assert_eq!(bank.prototypes.row(1), centers.row(best_map.1), "seed {seed}");
        }
    }

    #[test]
    fn zero_norm_rows_are_rejected() {
        let centers = arr2(&[[1.0, 0.0], [0.0, 0.0]]);
        let w = arr2(&[[1.0, 0.0]]);
        assert!(matches!(
            align_and_extract(&w, &centers),
            Err(AssignmentError::DegenerateVector(1))
        ));
    }
}
