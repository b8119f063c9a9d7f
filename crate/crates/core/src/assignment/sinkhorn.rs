//! Balanced soft cluster assignment via Sinkhorn-Knopp scaling.
//!
//! Starting from `M = exp(Q / epsilon)` (column-stabilized), the iteration
//! alternately normalizes columns to a uniform `1/G` marginal and rows to a
//! uniform `1/N` marginal, which spreads a batch across all clusters instead
//! of letting one cluster absorb everything. A final row rescale turns each
//! row into a probability distribution over clusters.

use super::AssignmentError;
use ndarray::{Array2, Axis};

/// Row-stochastic soft assignment of N samples to G clusters.
#[derive(Debug, Clone)]
pub struct SoftAssignment {
    pub probabilities: Array2<f64>,
    pub iterations_used: usize,
    pub epsilon: f64,
    /// Set when the batch has fewer samples than clusters, so the balanced
    /// marginal cannot actually fill every cluster.
    pub underfilled: bool,
}

fn scaled_kernel(q: &Array2<f64>, epsilon: f64) -> Result<Array2<f64>, AssignmentError> {
    if epsilon <= 0.0 {
        return Err(AssignmentError::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if let Some(bad) = q.iter().position(|x| !x.is_finite()) {
        return Err(AssignmentError::Numeric {
            iteration: 0,
            reason: format!("non-finite logit at flat index {bad}"),
        });
    }
    // Column-wise stabilization: subtracting each column's max before exp is
    // cancelled exactly by the first column normalization.
    let mut m = q.mapv(|x| x / epsilon);
    for mut col in m.columns_mut() {
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        col.mapv_inplace(|x| (x - max).exp());
    }
    Ok(m)
}

fn balance_step(m: &mut Array2<f64>, iteration: usize) -> Result<(), AssignmentError> {
    let (n, g) = m.dim();
    let col_sums = m.sum_axis(Axis(0));
    for (j, &s) in col_sums.iter().enumerate() {
        if !(s.is_finite() && s > 0.0) {
            return Err(AssignmentError::Numeric {
                iteration,
                reason: format!("column {j} sum degenerate ({s})"),
            });
        }
    }
    let col_scale = col_sums.mapv(|s| 1.0 / (g as f64 * s));
    for mut row in m.rows_mut() {
        row *= &col_scale;
    }
    let row_sums = m.sum_axis(Axis(1));
    for (i, &s) in row_sums.iter().enumerate() {
        if !(s.is_finite() && s > 0.0) {
            return Err(AssignmentError::Numeric {
                iteration,
                reason: format!("row {i} sum degenerate ({s})"),
            });
        }
    }
    for (mut row, &s) in m.rows_mut().into_iter().zip(row_sums.iter()) {
        let scale = 1.0 / (n as f64 * s);
        row.mapv_inplace(|x| x * scale);
    }
    Ok(())
}

fn finish(mut m: Array2<f64>, iterations: usize, epsilon: f64) -> SoftAssignment {
    let underfilled = m.nrows() < m.ncols();
    for mut row in m.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|x| x / s);
    }
    SoftAssignment {
        probabilities: m,
        iterations_used: iterations,
        epsilon,
        underfilled,
    }
}

/// Fixed-iteration Sinkhorn assignment as used inside training steps.
pub fn sinkhorn_assign(
    q: &Array2<f64>,
    epsilon: f64,
    n_iters: usize,
) -> Result<SoftAssignment, AssignmentError> {
    if n_iters == 0 {
        return Err(AssignmentError::InvalidParameter(
            "n_iters must be at least 1".into(),
        ));
    }
    let mut m = scaled_kernel(q, epsilon)?;
    for it in 0..n_iters {
        balance_step(&mut m, it + 1)?;
    }
    Ok(finish(m, n_iters, epsilon))
}

/// Total variation distance between the column marginals and uniform.
pub(crate) fn column_marginal_tv(m: &Array2<f64>) -> f64 {
    let g = m.ncols() as f64;
    let total: f64 = m.sum();
    0.5 * m
        .sum_axis(Axis(0))
        .iter()
        .map(|&s| (s / total - 1.0 / g).abs())
        .sum::<f64>()
}

/// Iterate until the column marginals are within `tol` total variation of
/// uniform, or `max_iters` is reached.
pub fn sinkhorn_converged(
    q: &Array2<f64>,
    epsilon: f64,
    max_iters: usize,
    tol: f64,
) -> Result<SoftAssignment, AssignmentError> {
    if max_iters == 0 {
        return Err(AssignmentError::InvalidParameter(
            "max_iters must be at least 1".into(),
        ));
    }
    let mut m = scaled_kernel(q, epsilon)?;
    let mut used = max_iters;
    for it in 0..max_iters {
        balance_step(&mut m, it + 1)?;
        if column_marginal_tv(&m) < tol {
            used = it + 1;
            break;
        }
    }
    Ok(finish(m, used, epsilon))
}
