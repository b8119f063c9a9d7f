//! Clustering evaluation: Hungarian-matched accuracy, Adjusted Rand Index,
//! and Normalized Mutual Information (arithmetic-mean normalization).
//!
//! All three metrics are invariant under relabeling of either argument. ARI
//! is computed in exact integer pair counts before the final division; NMI
//! uses the entropy decomposition `MI = H(pred) + H(true) - H(joint)` with
//! `0 log 0 = 0`.

use crate::assignment::hungarian;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("label vectors have different lengths: {pred} vs {truth}")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("label vectors are empty")]
    Empty,
}

/// Joint counts of (predicted cluster, true class) pairs.
#[derive(Debug, Clone)]
pub struct ContingencyTable {
    /// `P x T` counts, rows and columns ordered by ascending original label.
    pub counts: Vec<Vec<u64>>,
    pub row_totals: Vec<u64>,
    pub col_totals: Vec<u64>,
    pub n: u64,
}

fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    for &l in labels {
        let next = ids.len();
        ids.entry(l).or_insert(next);
    }
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

pub fn contingency_table(pred: &[usize], truth: &[usize]) -> Result<ContingencyTable, MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (p_ids, p_count) = compact(pred);
    let (t_ids, t_count) = compact(truth);
    let mut counts = vec![vec![0u64; t_count]; p_count];
    for (&p, &t) in p_ids.iter().zip(&t_ids) {
        counts[p][t] += 1;
    }
    let row_totals: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
    let col_totals: Vec<u64> = (0..t_count)
        .map(|j| counts.iter().map(|r| r[j]).sum())
        .collect();
    Ok(ContingencyTable {
        counts,
        row_totals,
        col_totals,
        n: pred.len() as u64,
    })
}

/// Best achievable agreement under an injective map from predicted clusters
/// to true classes, found by minimum-cost matching on negated counts.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64, MetricsError> {
    let table = contingency_table(pred, truth)?;
    let p = table.counts.len();
    let t = table.counts[0].len();
    let side = p.max(t);
    let cost = Array2::from_shape_fn((side, side), |(i, j)| {
        if i < p && j < t {
            -(table.counts[i][j] as f64)
        } else {
            0.0
        }
    });
    let assignment = hungarian(&cost).expect("square finite cost");
    let mut matched = 0u64;
    for (i, &j) in assignment.iter().enumerate() {
        if i < p && j < t {
            matched += table.counts[i][j];
        }
    }
    Ok(matched as f64 / table.n as f64)
}

fn choose2(x: u64) -> u128 {
    let x = x as u128;
    x * x.saturating_sub(1) / 2
}

/// Adjusted Rand Index. The numerator and denominator are assembled in exact
/// integer arithmetic; the degenerate zero-denominator case (both partitions
/// trivial in the same way) is defined as 1.
pub fn ari(pred: &[usize], truth: &[usize]) -> Result<f64, MetricsError> {
    let table = contingency_table(pred, truth)?;
    let index: u128 = table
        .counts
        .iter()
        .flat_map(|row| row.iter())
        .map(|&c| choose2(c))
        .sum();
    let sum_rows: u128 = table.row_totals.iter().map(|&a| choose2(a)).sum();
    let sum_cols: u128 = table.col_totals.iter().map(|&b| choose2(b)).sum();
    let pairs = choose2(table.n);
    // ari = (index - sum_rows*sum_cols/pairs) / ((sum_rows+sum_cols)/2 - sum_rows*sum_cols/pairs)
    // Multiply through by 2*pairs to stay integral.
    let num = 2i128 * (pairs as i128 * index as i128 - (sum_rows * sum_cols) as i128);
    let den = pairs as i128 * (sum_rows + sum_cols) as i128 - 2 * (sum_rows * sum_cols) as i128;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

fn entropy_from_counts(counts: impl Iterator<Item = u64>, n: u64) -> f64 {
    let n = n as f64;
    let mut h = 0.0;
    for c in counts {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.ln();
        }
    }
    h
}

/// Normalized Mutual Information with arithmetic-mean normalization. Both
/// labelings constant is defined as 1; a single constant labeling scores 0.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64, MetricsError> {
    let table = contingency_table(pred, truth)?;
    let h_pred = entropy_from_counts(table.row_totals.iter().copied(), table.n);
    let h_true = entropy_from_counts(table.col_totals.iter().copied(), table.n);
    if h_pred == 0.0 && h_true == 0.0 {
        return Ok(1.0);
    }
    let h_joint = entropy_from_counts(
        table.counts.iter().flat_map(|row| row.iter().copied()),
        table.n,
    );
    let mi = h_pred + h_true - h_joint;
    let value = mi / ((h_pred + h_true) / 2.0);
    Ok(value.clamp(0.0, 1.0))
}

/// The three evaluation metrics as one report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub acc: f64,
    pub ari: f64,
    pub nmi: f64,
}

impl MetricReport {
    pub fn compute(pred: &[usize], truth: &[usize]) -> Result<Self, MetricsError> {
        Ok(Self {
            acc: clustering_accuracy(pred, truth)?,
            ari: ari(pred, truth)?,
            nmi: nmi(pred, truth)?,
        })
    }
}

impl std::fmt::Display for MetricReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "ACC {:.4}  ARI {:.4}  NMI {:.4}",
            self.acc, self.ari, self.nmi
        )
    }
}
