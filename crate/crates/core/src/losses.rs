//! Loss functions for both training stages, each returning its value and
//! exact analytic gradients.
//!
//! Conventions shared by every loss here:
//! - A batch of N samples is encoded twice; anchors index the 2N stacked
//!   rows `[Z; Z']` with row `i` and row `i + N` being views of one sample.
//! - Similarities are raw dot products scaled by a temperature `tau` where a
//!   temperature applies; candidate sets always exclude the anchor itself.
//! - Log-sum-exp uses max subtraction throughout.

use crate::encoder::ViewPair;
use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("temperature must be positive, got {0}")]
    InvalidTemperature(f64),
    #[error("label {label} out of range for {classes} classes")]
    InvalidLabel { label: usize, classes: usize },
    #[error("assignment row {row} sums to {sum}, expected 1")]
    InvalidAssignment { row: usize, sum: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// A loss value with gradients for the inputs that produced it.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub value: f64,
    pub grad_z: Array2<f64>,
    pub grad_z_prime: Array2<f64>,
    /// Gradient w.r.t. the weight matrix involved, when one is: the
    /// classifier for cross entropy, the prototype bank for the swapped loss.
    pub grad_weights: Option<Array2<f64>>,
}

impl LossOutput {
    /// A zero loss with zero gradients shaped for the given views.
    pub fn zero_like(views: &ViewPair) -> Self {
        Self {
            value: 0.0,
            grad_z: Array2::zeros(views.z.raw_dim()),
            grad_z_prime: Array2::zeros(views.z_prime.raw_dim()),
            grad_weights: None,
        }
    }
}

/// Unweighted sum of loss parts computed on the same batch. Gradients add
/// componentwise; at most one distinct weight-gradient shape may appear.
pub fn compose(parts: &[&LossOutput]) -> Result<LossOutput, LossError> {
    let first = parts
        .first()
        .ok_or_else(|| LossError::ShapeMismatch("compose of zero parts".into()))?;
    let mut out = LossOutput {
        value: 0.0,
        grad_z: Array2::zeros(first.grad_z.raw_dim()),
        grad_z_prime: Array2::zeros(first.grad_z_prime.raw_dim()),
        grad_weights: None,
    };
    for part in parts {
        if part.grad_z.dim() != out.grad_z.dim() || part.grad_z_prime.dim() != out.grad_z_prime.dim()
        {
            return Err(LossError::ShapeMismatch(
                "loss parts computed on different batches".into(),
            ));
        }
        out.value += part.value;
        out.grad_z += &part.grad_z;
        out.grad_z_prime += &part.grad_z_prime;
        if let Some(gw) = &part.grad_weights {
            match &mut out.grad_weights {
                None => out.grad_weights = Some(gw.clone()),
                Some(acc) => {
                    if acc.dim() != gw.dim() {
                        return Err(LossError::ShapeMismatch(
                            "conflicting weight gradient shapes".into(),
                        ));
                    }
                    *acc += gw;
                }
            }
        }
    }
    Ok(out)
}

fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|x| (x - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|x| x / sum);
    }
    out
}

/// Mean over the batch of the negative log softmax probability of each true
/// class, with logits `weights . z`. Gradients flow to `z` and `weights`.
pub fn cross_entropy(
    z: &Array2<f64>,
    labels: &[usize],
    weights: &Array2<f64>,
) -> Result<LossOutput, LossError> {
    let (n, d) = z.dim();
    let classes = weights.nrows();
    if weights.ncols() != d {
        return Err(LossError::ShapeMismatch(format!(
            "weights are {}x{} but representations have dim {d}",
            classes,
            weights.ncols()
        )));
    }
    if labels.len() != n {
        return Err(LossError::ShapeMismatch(format!(
            "{} labels for {n} rows",
            labels.len()
        )));
    }
    for &label in labels {
        if label >= classes {
            return Err(LossError::InvalidLabel { label, classes });
        }
    }
    let logits = z.dot(&weights.t());
    let mut value = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
        value += lse - row[label];
    }
    let mut grad_logits = softmax_rows(&logits);
    for (i, &label) in labels.iter().enumerate() {
        grad_logits[[i, label]] -= 1.0;
    }
    value /= n as f64;
    grad_logits.mapv_inplace(|x| x / n as f64);
    Ok(LossOutput {
        value,
        grad_z: grad_logits.dot(weights),
        grad_z_prime: Array2::zeros((n, d)),
        grad_weights: Some(grad_logits.t().dot(z)),
    })
}

/// Shared engine for the contrastive losses over the 2N stacked views.
///
/// For each anchor i with positive set P(i) (same label, anchor excluded) the
/// contribution is `-1/|P(i)| * sum_{p in P(i)} log softmax_j(s_ij)[p]` over
/// candidates j != i. Anchors with empty P(i) contribute zero when
/// `skip_empty` is set and are a usage bug otherwise.
fn contrastive_core(
    stacked: &Array2<f64>,
    labels: &[usize],
    tau: f64,
    skip_empty: bool,
) -> Result<(f64, Array2<f64>), LossError> {
    if tau <= 0.0 {
        return Err(LossError::InvalidTemperature(tau));
    }
    let m = stacked.nrows();
    debug_assert_eq!(labels.len(), m);
    let sim = stacked.dot(&stacked.t()).mapv(|x| x / tau);
    let mut value = 0.0;
    let mut grad_sim = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        let positives: Vec<usize> = (0..m)
            .filter(|&j| j != i && labels[j] == labels[i])
            .collect();
        if positives.is_empty() {
            assert!(skip_empty, "anchor {i} has no positives");
            continue;
        }
        let row = sim.row(i);
        let mut max = f64::NEG_INFINITY;
        for j in 0..m {
            if j != i {
                max = max.max(row[j]);
            }
        }
        let mut denom = 0.0;
        for j in 0..m {
            if j != i {
                denom += (row[j] - max).exp();
            }
        }
        let lse = max + denom.ln();
        let inv_p = 1.0 / positives.len() as f64;
        for &p in &positives {
            value += inv_p * (lse - row[p]);
            grad_sim[[i, p]] -= inv_p;
        }
        // The log-denominator appears once per positive with weight 1/|P|,
        // so the softmax term enters with total weight one.
        for j in 0..m {
            if j != i {
                grad_sim[[i, j]] += (row[j] - lse).exp();
            }
        }
    }
    // d(s_ij)/d(e_k) contributes through both the row and column of k.
    let grad = (grad_sim.dot(stacked) + grad_sim.t().dot(stacked)).mapv(|x| x / tau);
    Ok((value, grad))
}

fn split_stacked_grad(views: &ViewPair, grad: Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let n = views.batch_size();
    (
        grad.slice(ndarray::s![..n, ..]).to_owned(),
        grad.slice(ndarray::s![n.., ..]).to_owned(),
    )
}

/// Supervised contrastive loss over both views with labels duplicated across
/// the two halves. Every anchor has at least one positive: its other view.
pub fn supervised_contrastive(
    views: &ViewPair,
    labels: &[usize],
    tau: f64,
) -> Result<LossOutput, LossError> {
    let n = views.batch_size();
    if labels.len() != n {
        return Err(LossError::ShapeMismatch(format!(
            "{} labels for batch of {n}",
            labels.len()
        )));
    }
    let mut duplicated = labels.to_vec();
    duplicated.extend_from_slice(labels);
    let (value, grad) = contrastive_core(&views.stacked(), &duplicated, tau, false)?;
    let (grad_z, grad_z_prime) = split_stacked_grad(views, grad);
    Ok(LossOutput {
        value,
        grad_z,
        grad_z_prime,
        grad_weights: None,
    })
}

/// Instance-discrimination contrastive loss: the only positive for each
/// anchor is the other view of the same sample.
pub fn unsupervised_contrastive(views: &ViewPair, tau: f64) -> Result<LossOutput, LossError> {
    let n = views.batch_size();
    // Giving both views of sample i a private label reduces instance
    // discrimination to the supervised form with singleton positives.
    let labels: Vec<usize> = (0..n).chain(0..n).collect();
    let (value, grad) = contrastive_core(&views.stacked(), &labels, tau, false)?;
    let (grad_z, grad_z_prime) = split_stacked_grad(views, grad);
    Ok(LossOutput {
        value,
        grad_z,
        grad_z_prime,
        grad_weights: None,
    })
}

/// Contrastive loss driven by hard pseudo labels over all 2N rows. Anchors
/// whose pseudo class has no other member are skipped.
pub fn pseudo_supervised_contrastive(
    views: &ViewPair,
    pseudo_labels: &[usize],
    tau: f64,
) -> Result<LossOutput, LossError> {
    let n = views.batch_size();
    if pseudo_labels.len() != 2 * n {
        return Err(LossError::ShapeMismatch(format!(
            "{} pseudo labels for 2N = {}",
            pseudo_labels.len(),
            2 * n
        )));
    }
    let (value, grad) = contrastive_core(&views.stacked(), pseudo_labels, tau, true)?;
    let (grad_z, grad_z_prime) = split_stacked_grad(views, grad);
    Ok(LossOutput {
        value,
        grad_z,
        grad_z_prime,
        grad_weights: None,
    })
}

/// Cluster logits for both views: plain dot products against the prototype
/// rows, no softmax.
pub fn cluster_logits(
    views: &ViewPair,
    prototypes: &Array2<f64>,
) -> Result<(Array2<f64>, Array2<f64>), LossError> {
    if prototypes.ncols() != views.z.ncols() {
        return Err(LossError::ShapeMismatch(format!(
            "prototypes have dim {} but representations have dim {}",
            prototypes.ncols(),
            views.z.ncols()
        )));
    }
    Ok((
        views.z.dot(&prototypes.t()),
        views.z_prime.dot(&prototypes.t()),
    ))
}

/// Swapped prediction loss on cluster logits: the first view's softmax is
/// scored against the second view's soft assignment and vice versa, averaged.
#[derive(Debug, Clone)]
pub struct SwappedCrossEntropy {
    pub value: f64,
    pub grad_q: Array2<f64>,
    pub grad_q_prime: Array2<f64>,
}

fn validate_targets(targets: &Array2<f64>) -> Result<(), LossError> {
    for (row, r) in targets.rows().into_iter().enumerate() {
        let sum: f64 = r.sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(LossError::InvalidAssignment { row, sum });
        }
    }
    Ok(())
}

fn soft_cross_entropy(logits: &Array2<f64>, targets: &Array2<f64>) -> (f64, Array2<f64>) {
    let n = logits.nrows() as f64;
    let probs = softmax_rows(logits);
    let mut value = 0.0;
    for i in 0..logits.nrows() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
        for (j, &t) in targets.row(i).iter().enumerate() {
            if t != 0.0 {
                value += t * (lse - row[j]);
            }
        }
    }
    let grad = (&probs - targets).mapv(|x| x / n);
    (value / n, grad)
}

/// Mean of the two swapped soft cross entropies. Targets are constants; no
/// gradient flows into them.
pub fn swapped_cross_entropy(
    q: &Array2<f64>,
    q_prime: &Array2<f64>,
    a: &Array2<f64>,
    a_prime: &Array2<f64>,
) -> Result<SwappedCrossEntropy, LossError> {
    if q.dim() != q_prime.dim() || q.dim() != a.dim() || q.dim() != a_prime.dim() {
        return Err(LossError::ShapeMismatch(
            "logits and assignments must share one N x G shape".into(),
        ));
    }
    validate_targets(a)?;
    validate_targets(a_prime)?;
    let (left, grad_q) = soft_cross_entropy(q, a_prime);
    let (right, grad_q_prime) = soft_cross_entropy(q_prime, a);
    Ok(SwappedCrossEntropy {
        value: (left + right) / 2.0,
        grad_q: grad_q.mapv(|x| x / 2.0),
        grad_q_prime: grad_q_prime.mapv(|x| x / 2.0),
    })
}

/// Swapped prediction loss chained through the cluster logits, yielding
/// gradients for both views and the prototype bank.
pub fn sinkhorn_swapped_loss(
    views: &ViewPair,
    prototypes: &Array2<f64>,
    a: &Array2<f64>,
    a_prime: &Array2<f64>,
) -> Result<LossOutput, LossError> {
    let (q, q_prime) = cluster_logits(views, prototypes)?;
    let swapped = swapped_cross_entropy(&q, &q_prime, a, a_prime)?;
    let grad_protos = swapped.grad_q.t().dot(&views.z) + swapped.grad_q_prime.t().dot(&views.z_prime);
    Ok(LossOutput {
        value: swapped.value,
        grad_z: swapped.grad_q.dot(prototypes),
        grad_z_prime: swapped.grad_q_prime.dot(prototypes),
        grad_weights: Some(grad_protos),
    })
}

/// Cross entropy against the first `k` prototype rows (the shared known-
/// intent classifier). The weight gradient comes back embedded in a full
/// bank-shaped matrix with zeros outside the classifier rows.
pub fn prototype_cross_entropy(
    z: &Array2<f64>,
    labels: &[usize],
    prototypes: &Array2<f64>,
    k: usize,
) -> Result<LossOutput, LossError> {
    if k > prototypes.nrows() {
        return Err(LossError::ShapeMismatch(format!(
            "classifier rows {k} exceed bank of {}",
            prototypes.nrows()
        )));
    }
    let classifier = prototypes.slice(ndarray::s![..k, ..]).to_owned();
    let mut out = cross_entropy(z, labels, &classifier)?;
    let grad_k = out.grad_weights.take().expect("cross entropy always has weight grads");
    let mut embedded = Array2::zeros(prototypes.raw_dim());
    embedded.slice_mut(ndarray::s![..k, ..]).assign(&grad_k);
    out.grad_weights = Some(embedded);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream_rng;
    use rand::Rng;

    const LN3: f64 = 1.0986122886681098;

    fn random_matrix(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = stream_rng(seed, "loss-test");
        Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0))
    }

    fn random_views(n: usize, d: usize, seed: u64) -> ViewPair {
        ViewPair::from_parts(random_matrix(n, d, seed), random_matrix(n, d, seed + 1000))
    }

    fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
        assert!((a - b).abs() <= tol, "{what}: {a} vs {b}");
    }

    /// Central finite differences over a matrix input.
    fn fd_matrix(mut f: impl FnMut(&Array2<f64>) -> f64, at: &Array2<f64>, h: f64) -> Array2<f64> {
        let mut grad = Array2::zeros(at.raw_dim());
        for idx in 0..at.len() {
            let (r, c) = (idx / at.ncols(), idx % at.ncols());
            let mut plus = at.clone();
            plus[[r, c]] += h;
            let mut minus = at.clone();
            minus[[r, c]] -= h;
            grad[[r, c]] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
        grad
    }

    fn assert_grad_close(analytic: &Array2<f64>, fd: &Array2<f64>, what: &str) {
        for (a, f) in analytic.iter().zip(fd.iter()) {
            let err = (a - f).abs() / a.abs().max(f.abs()).max(1.0);
            assert!(err < 1e-4, "{what}: analytic {a} vs fd {f}");
        }
    }

    // ----- cross entropy -----

    #[test]
    fn uniform_logits_give_ln_k() {
        let z = random_matrix(4, 3, 1);
        let w = Array2::zeros((3, 3));
        let out = cross_entropy(&z, &[0, 1, 2, 0], &w).unwrap();
        assert_close(out.value, 3.0f64.ln(), 1e-12, "ln K");
    }

    #[test]
    fn confident_logit_is_nearly_free() {
        // Two classes, true-class logit 10, other 0.
        let z = ndarray::arr2(&[[10.0, 0.0]]);
        let w = ndarray::arr2(&[[1.0, 0.0], [0.0, 1.0]]);
        let out = cross_entropy(&z, &[0], &w).unwrap();
        assert_close(out.value, (1.0 + (-10.0f64).exp()).ln(), 1e-12, "margin 10");
    }

    #[test]
    fn cross_entropy_matches_brute_force() {
        let z = random_matrix(4, 5, 2);
        let w = random_matrix(3, 5, 3);
        let labels = [2usize, 0, 1, 1];
        let out = cross_entropy(&z, &labels, &w).unwrap();
        // Independent direct evaluation.
        let mut expect = 0.0;
        for i in 0..4 {
            let logits: Vec<f64> = (0..3).map(|k| z.row(i).dot(&w.row(k))).collect();
            let denom: f64 = logits.iter().map(|&x| x.exp()).sum();
            expect -= (logits[labels[i]].exp() / denom).ln();
        }
        expect /= 4.0;
        assert_close(out.value, expect, 1e-10, "brute force ce");
    }

    #[test]
    fn cross_entropy_rejects_out_of_range_label() {
        let z = random_matrix(2, 3, 4);
        let w = random_matrix(2, 3, 5);
        assert!(matches!(
            cross_entropy(&z, &[0, 2], &w),
            Err(LossError::InvalidLabel { .. })
        ));
    }

    #[test]
    fn cross_entropy_gradients_match_finite_differences() {
        let z = random_matrix(4, 5, 6);
        let w = random_matrix(3, 5, 7);
        let labels = [0usize, 2, 1, 2];
        let out = cross_entropy(&z, &labels, &w).unwrap();
        let fd_z = fd_matrix(|m| cross_entropy(m, &labels, &w).unwrap().value, &z, 1e-5);
        assert_grad_close(&out.grad_z, &fd_z, "ce grad_z");
        let fd_w = fd_matrix(|m| cross_entropy(&z, &labels, m).unwrap().value, &w, 1e-5);
        assert_grad_close(out.grad_weights.as_ref().unwrap(), &fd_w, "ce grad_w");
    }

    // ----- supervised contrastive -----

    #[test]
    fn single_sample_supervised_contrastive_is_zero() {
        let views = random_views(1, 4, 8);
        let out = supervised_contrastive(&views, &[0], 0.07).unwrap();
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn identical_embeddings_same_label_give_four_ln_three() {
        let row = vec![0.3, -0.4, 0.5];
        let z = Array2::from_shape_vec((2, 3), [row.clone(), row.clone()].concat()).unwrap();
        let views = ViewPair::from_parts(z.clone(), z);
        let out = supervised_contrastive(&views, &[7, 7], 0.5).unwrap();
        assert_close(out.value, 4.0 * LN3, 1e-9, "4 ln 3");
    }

    #[test]
    fn supervised_contrastive_matches_nested_loop_oracle() {
        for seed in 0..5u64 {
            let n = 3;
            let views = random_views(n, 4, 100 + seed);
            let mut rng = stream_rng(seed, "labels");
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let tau = 0.3;
            let out = supervised_contrastive(&views, &labels, tau).unwrap();

            // Literal nested-loop evaluation over the 2N anchors.
            let stacked = views.stacked();
            let mut dup = labels.clone();
            dup.extend_from_slice(&labels);
            let m = 2 * n;
            let mut expect = 0.0;
            for i in 0..m {
                let pos: Vec<usize> =
                    (0..m).filter(|&p| p != i && dup[p] == dup[i]).collect();
                let denom: f64 = (0..m)
                    .filter(|&j| j != i)
                    .map(|j| (stacked.row(i).dot(&stacked.row(j)) / tau).exp())
                    .sum();
                for &p in &pos {
                    let num = (stacked.row(i).dot(&stacked.row(p)) / tau).exp();
                    expect += -(num / denom).ln() / pos.len() as f64;
                }
            }
            assert_close(out.value, expect, 1e-9, "nested loop sup con");
        }
    }

    #[test]
    fn supervised_contrastive_gradients_match_finite_differences() {
        let n = 3;
        let views = random_views(n, 4, 20);
        let labels = [0usize, 1, 0];
        let tau = 0.4;
        let out = supervised_contrastive(&views, &labels, tau).unwrap();
        let fd_z = fd_matrix(
            |m| {
                let v = ViewPair::from_parts(m.clone(), views.z_prime.clone());
                supervised_contrastive(&v, &labels, tau).unwrap().value
            },
            &views.z,
            1e-5,
        );
        assert_grad_close(&out.grad_z, &fd_z, "sup con grad_z");
        let fd_zp = fd_matrix(
            |m| {
                let v = ViewPair::from_parts(views.z.clone(), m.clone());
                supervised_contrastive(&v, &labels, tau).unwrap().value
            },
            &views.z_prime,
            1e-5,
        );
        assert_grad_close(&out.grad_z_prime, &fd_zp, "sup con grad_z_prime");
    }

    #[test]
    fn nonpositive_temperature_is_rejected() {
        let views = random_views(2, 3, 30);
        assert!(matches!(
            supervised_contrastive(&views, &[0, 1], 0.0),
            Err(LossError::InvalidTemperature(_))
        ));
        assert!(matches!(
            unsupervised_contrastive(&views, -1.0),
            Err(LossError::InvalidTemperature(_))
        ));
    }

    // ----- unsupervised contrastive -----

    #[test]
    fn single_sample_unsupervised_contrastive_is_zero() {
        let views = random_views(1, 4, 31);
        let out = unsupervised_contrastive(&views, 0.07).unwrap();
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn identical_embeddings_unsupervised_gives_four_ln_three() {
        let row = vec![0.1, 0.2];
        let z = Array2::from_shape_vec((2, 2), [row.clone(), row.clone()].concat()).unwrap();
        let views = ViewPair::from_parts(z.clone(), z);
        let out = unsupervised_contrastive(&views, 1.0).unwrap();
        assert_close(out.value, 4.0 * LN3, 1e-9, "4 ln 3 unsup");
    }

    #[test]
    fn unsupervised_contrastive_matches_nested_loop_oracle() {
        let n = 4;
        let views = random_views(n, 3, 40);
        let tau = 0.2;
        let out = unsupervised_contrastive(&views, tau).unwrap();
        let stacked = views.stacked();
        let m = 2 * n;
        let mut expect = 0.0;
        for i in 0..m {
            let mate = if i < n { i + n } else { i - n };
            let denom: f64 = (0..m)
                .filter(|&j| j != i)
                .map(|j| (stacked.row(i).dot(&stacked.row(j)) / tau).exp())
                .sum();
            let num = (stacked.row(i).dot(&stacked.row(mate)) / tau).exp();
            expect += -(num / denom).ln();
        }
        let rel = (out.value - expect).abs() / expect.abs().max(1.0);
        assert!(rel < 1e-10, "{} vs {expect}", out.value);
    }

    #[test]
    fn unsupervised_gradients_match_finite_differences() {
        let views = random_views(3, 4, 41);
        let tau = 0.5;
        let out = unsupervised_contrastive(&views, tau).unwrap();
        let fd_z = fd_matrix(
            |m| {
                let v = ViewPair::from_parts(m.clone(), views.z_prime.clone());
                unsupervised_contrastive(&v, tau).unwrap().value
            },
            &views.z,
            1e-5,
        );
        assert_grad_close(&out.grad_z, &fd_z, "unsup grad_z");
    }

    // ----- pseudo-label contrastive -----

    #[test]
    fn pseudo_labels_equal_true_labels_is_bit_identical_to_supervised() {
        let views = random_views(3, 4, 50);
        let labels = [1usize, 0, 1];
        let mut dup = labels.to_vec();
        dup.extend_from_slice(&labels);
        let sup = supervised_contrastive(&views, &labels, 0.07).unwrap();
        let pseudo = pseudo_supervised_contrastive(&views, &dup, 0.07).unwrap();
        assert_eq!(sup.value, pseudo.value);
        assert_eq!(sup.grad_z, pseudo.grad_z);
        assert_eq!(sup.grad_z_prime, pseudo.grad_z_prime);
    }

    #[test]
    fn all_distinct_pseudo_labels_contribute_zero() {
        let views = random_views(2, 3, 51);
        let out = pseudo_supervised_contrastive(&views, &[0, 1, 2, 3], 0.1).unwrap();
        assert_eq!(out.value, 0.0);
        assert!(out.grad_z.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn shared_pseudo_class_identical_embeddings_gives_four_ln_three() {
        let row = vec![0.9, -0.1];
        let z = Array2::from_shape_vec((2, 2), [row.clone(), row.clone()].concat()).unwrap();
        let views = ViewPair::from_parts(z.clone(), z);
        let out = pseudo_supervised_contrastive(&views, &[3, 3, 3, 3], 1.0).unwrap();
        assert_close(out.value, 4.0 * LN3, 1e-9, "pseudo 4 ln 3");
    }

    // ----- cluster logits and swapped loss -----

    #[test]
    fn cluster_logits_are_plain_dot_products() {
        let views = random_views(3, 2, 60);
        let protos = random_matrix(4, 2, 61);
        let (q, qp) = cluster_logits(&views, &protos).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                assert_close(q[[i, j]], views.z.row(i).dot(&protos.row(j)), 1e-12, "q");
                assert_close(
                    qp[[i, j]],
                    views.z_prime.row(i).dot(&protos.row(j)),
                    1e-12,
                    "q'",
                );
            }
        }
        // Unit vector against itself scores one, orthogonal scores zero.
        let unit = ndarray::arr2(&[[1.0, 0.0]]);
        let ortho = ndarray::arr2(&[[1.0, 0.0], [0.0, 1.0]]);
        let v = ViewPair::from_parts(unit.clone(), unit);
        let (q, _) = cluster_logits(&v, &ortho).unwrap();
        assert_eq!(q[[0, 0]], 1.0);
        assert_eq!(q[[0, 1]], 0.0);
    }

    #[test]
    fn uniform_swapped_cross_entropy_is_ln_g() {
        let g = 5;
        let q = Array2::zeros((3, g));
        let a = Array2::from_elem((3, g), 1.0 / g as f64);
        let out = swapped_cross_entropy(&q, &q, &a, &a).unwrap();
        assert_close(out.value, (g as f64).ln(), 1e-12, "ln G");
    }

    #[test]
    fn saturated_swapped_cross_entropy_vanishes() {
        let mut q = Array2::zeros((2, 3));
        q[[0, 1]] = 20.0;
        q[[1, 2]] = 20.0;
        let mut a = Array2::zeros((2, 3));
        a[[0, 1]] = 1.0;
        a[[1, 2]] = 1.0;
        let out = swapped_cross_entropy(&q, &q, &a, &a).unwrap();
        assert!(out.value < 1e-8, "{}", out.value);
    }

    #[test]
    fn swapped_cross_entropy_matches_nested_loop_oracle() {
        let n = 4;
        let g = 6;
        let q = random_matrix(n, g, 70);
        let qp = random_matrix(n, g, 71);
        let make_targets = |seed: u64| -> Array2<f64> {
            let mut t = random_matrix(n, g, seed).mapv(f64::exp);
            for mut row in t.rows_mut() {
                let sum = row.sum();
                row.mapv_inplace(|x| x / sum);
            }
            t
        };
        let a = make_targets(72);
        let ap = make_targets(73);
        let out = swapped_cross_entropy(&q, &qp, &a, &ap).unwrap();

        let soft = |logits: &Array2<f64>, targets: &Array2<f64>| -> f64 {
            let mut total = 0.0;
            for i in 0..n {
                let denom: f64 = (0..g).map(|r| logits[[i, r]].exp()).sum();
                for j in 0..g {
                    total -= targets[[i, j]] * (logits[[i, j]].exp() / denom).ln();
                }
            }
            total / n as f64
        };
        let expect = (soft(&q, &ap) + soft(&qp, &a)) / 2.0;
        assert_close(out.value, expect, 1e-10, "nested loop swapped");

        // Symmetry under exchanging the two view/assignment pairs.
        let swapped = swapped_cross_entropy(&qp, &q, &ap, &a).unwrap();
        assert_close(out.value, swapped.value, 1e-12, "swap symmetry");

        let fd_q = fd_matrix(
            |m| swapped_cross_entropy(m, &qp, &a, &ap).unwrap().value,
            &q,
            1e-5,
        );
        assert_grad_close(&out.grad_q, &fd_q, "swapped grad_q");
    }

    #[test]
    fn swapped_cross_entropy_rejects_bad_targets() {
        let q = random_matrix(2, 3, 80);
        let mut a = Array2::from_elem((2, 3), 1.0 / 3.0);
        a[[1, 0]] = 0.9;
        assert!(matches!(
            swapped_cross_entropy(&q, &q, &a, &a),
            Err(LossError::InvalidAssignment { row: 1, .. })
        ));
    }

    #[test]
    fn chained_swapped_loss_gradients_match_finite_differences() {
        let n = 3;
        let g = 4;
        let d = 5;
        let views = random_views(n, d, 90);
        let protos = random_matrix(g, d, 91);
        let mut a = random_matrix(n, g, 92).mapv(f64::exp);
        for mut row in a.rows_mut() {
            let sum = row.sum();
            row.mapv_inplace(|x| x / sum);
        }
        let ap = a.clone();
        let out = sinkhorn_swapped_loss(&views, &protos, &a, &ap).unwrap();

        let fd_protos = fd_matrix(
            |m| sinkhorn_swapped_loss(&views, m, &a, &ap).unwrap().value,
            &protos,
            1e-5,
        );
        assert_grad_close(out.grad_weights.as_ref().unwrap(), &fd_protos, "proto grads");

        let fd_z = fd_matrix(
            |m| {
                let v = ViewPair::from_parts(m.clone(), views.z_prime.clone());
                sinkhorn_swapped_loss(&v, &protos, &a, &ap).unwrap().value
            },
            &views.z,
            1e-5,
        );
        assert_grad_close(&out.grad_z, &fd_z, "chained grad_z");
    }

    // ----- composition -----

    #[test]
    fn compose_adds_values_and_gradients() {
        let views = random_views(3, 4, 95);
        let labels = [0usize, 1, 0];
        let w = random_matrix(2, 4, 96);
        let ce = cross_entropy(&views.z, &labels, &w).unwrap();
        let sc = supervised_contrastive(&views, &labels, 0.07).unwrap();
        let total = compose(&[&ce, &sc]).unwrap();
        assert_close(total.value, ce.value + sc.value, 1e-12, "sum");
        let expect = &ce.grad_z + &sc.grad_z;
        assert_eq!(total.grad_z, expect);
        assert_eq!(total.grad_weights.as_ref().unwrap(), ce.grad_weights.as_ref().unwrap());
    }

    #[test]
    fn compose_with_a_zero_part_is_the_other_part() {
        let views = random_views(2, 3, 97);
        let zero = LossOutput::zero_like(&views);
        let sc = unsupervised_contrastive(&views, 0.1).unwrap();
        let total = compose(&[&sc, &zero]).unwrap();
        assert_eq!(total.value, sc.value);
        assert_eq!(total.grad_z, sc.grad_z);
    }

    #[test]
    fn compose_rejects_mismatched_batches() {
        let a = unsupervised_contrastive(&random_views(2, 3, 98), 0.1).unwrap();
        let b = unsupervised_contrastive(&random_views(3, 3, 99), 0.1).unwrap();
        assert!(matches!(compose(&[&a, &b]), Err(LossError::ShapeMismatch(_))));
    }

    // ----- cross-loss properties -----

    #[test]
    fn losses_are_nonnegative_and_permutation_invariant() {
        for seed in 0..10u64 {
            let n = 4;
            let views = random_views(n, 3, 200 + seed);
            let mut rng = stream_rng(seed, "perm");
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let tau = 0.3;

            let sup = supervised_contrastive(&views, &labels, tau).unwrap();
            let unsup = unsupervised_contrastive(&views, tau).unwrap();
            assert!(sup.value >= 0.0);
            assert!(unsup.value >= 0.0);

            // Apply one permutation to rows of both views and the labels.
            let mut perm: Vec<usize> = (0..n).collect();
            use rand::seq::SliceRandom;
            perm.shuffle(&mut rng);
            let permute = |m: &Array2<f64>| -> Array2<f64> {
                let mut out = Array2::zeros(m.raw_dim());
                for (new, &old) in perm.iter().enumerate() {
                    out.row_mut(new).assign(&m.row(old));
                }
                out
            };
            let pviews = ViewPair::from_parts(permute(&views.z), permute(&views.z_prime));
            let plabels: Vec<usize> = perm.iter().map(|&old| labels[old]).collect();
            let psup = supervised_contrastive(&pviews, &plabels, tau).unwrap();
            let punsup = unsupervised_contrastive(&pviews, tau).unwrap();
            assert_close(sup.value, psup.value, 1e-9, "sup perm invariance");
            assert_close(unsup.value, punsup.value, 1e-9, "unsup perm invariance");
        }
    }
}
