//! K-Means++ seeding with Lloyd refinement.

use super::AssignmentError;
use crate::seed::stream_rng;
use ndarray::Array2;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centers: Array2<f64>,
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum()
}

/// Squared-distance-weighted seeding: the first center is uniform, each
/// subsequent one is drawn proportionally to the squared distance from the
/// nearest chosen center. Falls back to a uniform draw when all weights
/// vanish (duplicate points).
fn seed_centers(data: &Array2<f64>, k: usize, rng: &mut impl Rng) -> Array2<f64> {
    let (m, d) = data.dim();
    let mut centers = Array2::zeros((k, d));
    let first = rng.gen_range(0..m);
    centers.row_mut(0).assign(&data.row(first));
    let mut min_d2 = vec![f64::INFINITY; m];
    for c in 1..k {
        let prev = centers.row(c - 1);
        let mut total = 0.0;
        for (i, row) in data.rows().into_iter().enumerate() {
            let d2 = sq_dist(row, prev);
            if d2 < min_d2[i] {
                min_d2[i] = d2;
            }
            total += min_d2[i];
        }
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = m - 1;
            for (i, &w) in min_d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.gen_range(0..m)
        };
        centers.row_mut(c).assign(&data.row(pick));
    }
    centers
}

fn assign_labels(data: &Array2<f64>, centers: &Array2<f64>) -> (Vec<usize>, f64) {
    let mut labels = Vec::with_capacity(data.nrows());
    let mut inertia = 0.0;
    for row in data.rows() {
        let mut best = 0usize;
        let mut best_d2 = f64::INFINITY;
        for (c, center) in centers.rows().into_iter().enumerate() {
            let d2 = sq_dist(row, center);
            if d2 < best_d2 {
                best_d2 = d2;
                best = c;
            }
        }
        labels.push(best);
        inertia += best_d2;
    }
    (labels, inertia)
}

/// Cluster `data` into `k` groups. Lloyd iterations run until the labels
/// reach a fixpoint or `max_lloyd_iters` passes; clusters that empty out are
/// re-seeded from the point farthest from its assigned center.
pub fn kmeans_pp(
    data: &Array2<f64>,
    k: usize,
    seed: u64,
    max_lloyd_iters: usize,
) -> Result<KMeansFit, AssignmentError> {
    let (m, d) = data.dim();
    if k == 0 {
        return Err(AssignmentError::InvalidParameter("k must be positive".into()));
    }
    if m < k {
        return Err(AssignmentError::InsufficientData {
            needed: k,
            available: m,
        });
    }
    let mut rng = stream_rng(seed, "kmeans");
    let mut centers = seed_centers(data, k, &mut rng);
    let (mut labels, mut inertia) = assign_labels(data, &centers);
    let mut iterations = 0;
    for _ in 0..max_lloyd_iters {
        iterations += 1;
        // Update step: means of the assigned points.
        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for (i, &label) in labels.iter().enumerate() {
            counts[label] += 1;
            let mut acc = sums.row_mut(label);
            acc += &data.row(i);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                centers.row_mut(c).assign(&sums.row(c).mapv(|x| x * inv));
            }
        }
        // Re-seed empty clusters from the farthest points, one each.
        let empties: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        if !empties.is_empty() {
            let mut order: Vec<usize> = (0..m).collect();
            let dist_to_center: Vec<f64> = (0..m)
                .map(|i| sq_dist(data.row(i), centers.row(labels[i])))
                .collect();
            order.sort_by(|&a, &b| {
                dist_to_center[b]
                    .partial_cmp(&dist_to_center[a])
                    .expect("finite distances")
                    .then(a.cmp(&b))
            });
            for (slot, &c) in empties.iter().enumerate() {
                centers.row_mut(c).assign(&data.row(order[slot]));
            }
        }
        let (new_labels, new_inertia) = assign_labels(data, &centers);
        let converged = new_labels == labels;
        labels = new_labels;
        inertia = new_inertia;
        if converged {
            break;
        }
    }
    Ok(KMeansFit {
        centers,
        labels,
        inertia,
        iterations,
    })
}

/// Best of `n_init` independent fits (by inertia), with per-restart seeds
/// derived from the one given. Ties keep the earliest restart.
pub fn kmeans_best_of(
    data: &Array2<f64>,
    k: usize,
    seed: u64,
    max_lloyd_iters: usize,
    n_init: usize,
) -> Result<KMeansFit, AssignmentError> {
    if n_init == 0 {
        return Err(AssignmentError::InvalidParameter("n_init must be positive".into()));
    }
    let mut best: Option<KMeansFit> = None;
    for restart in 0..n_init {
        let fit = kmeans_pp(
            data,
            k,
            crate::seed::derive_seed(seed, &format!("restart-{restart}")),
            max_lloyd_iters,
        )?;
        let better = best.as_ref().is_none_or(|b| fit.inertia < b.inertia);
        if better {
            best = Some(fit);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn one_point_per_cluster_has_zero_inertia() {
        let data = ndarray::arr2(&[[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]]);
        let fit = kmeans_pp(&data, 3, 7, 50).unwrap();
        assert!(fit.inertia < 1e-12);
        let mut sorted = fit.labels.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2]);
    }

    #[test]
    fn identical_points_reseed_empty_cluster_onto_the_point() {
        let data = Array2::from_elem((5, 2), 1.5);
        let fit = kmeans_pp(&data, 2, 3, 50).unwrap();
        for center in fit.centers.rows() {
            assert_eq!(center.to_vec(), vec![1.5, 1.5]);
        }
        assert!(fit.inertia == 0.0);
    }

    #[test]
    fn recovers_two_well_separated_blobs() {
        let mut rng = crate::seed::stream_rng(13, "blob");
        let normal = Normal::new(0.0, 0.01).unwrap();
        let mut rows = Vec::new();
        for _ in 0..40 {
            rows.push([normal.sample(&mut rng), normal.sample(&mut rng)]);
        }
        for _ in 0..40 {
            rows.push([
                10.0 + normal.sample(&mut rng),
                10.0 + normal.sample(&mut rng),
            ]);
        }
        let data = Array2::from_shape_fn((80, 2), |(i, j)| rows[i][j]);
        let fit = kmeans_pp(&data, 2, 5, 100).unwrap();
        let mut centers: Vec<Vec<f64>> = fit.centers.rows().into_iter().map(|r| r.to_vec()).collect();
        centers.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert!((centers[0][0]).abs() < 0.1 && (centers[0][1]).abs() < 0.1);
        assert!((centers[1][0] - 10.0).abs() < 0.1 && (centers[1][1] - 10.0).abs() < 0.1);
    }

    #[test]
    fn too_few_points_is_an_error() {
        let data = Array2::zeros((2, 3));
        assert!(matches!(
            kmeans_pp(&data, 3, 0, 10),
            Err(AssignmentError::InsufficientData { needed: 3, available: 2 })
        ));
    }

    #[test]
    fn inertia_never_increases_across_lloyd_iterations() {
        let mut rng = crate::seed::stream_rng(17, "inertia");
        use rand::Rng;
        let data = Array2::from_shape_fn((60, 4), |_| rng.gen_range(-2.0..2.0));
        // Track inertia across iteration counts; a longer run never ends
        // with a larger inertia than a shorter one.
        let mut prev = f64::INFINITY;
        for iters in 1..12 {
            let fit = kmeans_pp(&data, 5, 23, iters).unwrap();
            assert!(
                fit.inertia <= prev + 1e-9,
                "iters {iters}: inertia {} > previous {prev}",
                fit.inertia
            );
            prev = fit.inertia;
        }
    }

    #[test]
    fn same_seed_reproduces_the_fit() {
        let mut rng = crate::seed::stream_rng(19, "repro");
        use rand::Rng;
        let data = Array2::from_shape_fn((30, 3), |_| rng.gen_range(-1.0..1.0));
        let a = kmeans_pp(&data, 4, 11, 100).unwrap();
        let b = kmeans_pp(&data, 4, 11, 100).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.centers, b.centers);
        assert_eq!(a.inertia, b.inertia);
    }
}
