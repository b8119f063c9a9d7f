//! Exact minimum-cost bipartite assignment.
//!
//! The solver is the O(n^3) shortest-augmenting-path formulation with dual
//! potentials. Rectangular inputs with `rows <= cols` are padded square with
//! zero-cost dummy rows. Among equal-cost optima the returned assignment
//! vector is the lexicographically smallest: after the first solve, each row
//! in order greedily tries smaller columns, restricted to zero-reduced-cost
//! edges (no other edge can appear in an optimal solution) and verified by
//! re-solving the remaining subproblem.

use super::AssignmentError;
use ndarray::Array2;

/// Solve a square problem; returns (row -> col, row potentials, col potentials).
fn solve_square(cost: &Array2<f64>) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = cost.nrows();
    debug_assert_eq!(n, cost.ncols());
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched_row = vec![0usize; n + 1]; // column j -> row (1-based, 0 = free)
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                    if cur < min_slack[j] {
                        min_slack[j] = cur;
                        way[j] = j0;
                    }
                    if min_slack[j] < delta {
                        delta = min_slack[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if matched_row[j] > 0 {
            assignment[matched_row[j] - 1] = j - 1;
        }
    }
    (
        assignment,
        u[1..].to_vec(),
        v[1..].to_vec(),
    )
}

fn pad_square(cost: &Array2<f64>) -> Array2<f64> {
    let (r, s) = cost.dim();
    let mut padded = Array2::zeros((s, s));
    padded.slice_mut(ndarray::s![..r, ..]).assign(cost);
    padded
}

/// Optimal assignment for the real rows of a possibly rectangular cost
/// matrix, plus the total and the dual potentials of the padded problem.
fn solve_padded(cost: &Array2<f64>) -> (Vec<usize>, f64, Vec<f64>, Vec<f64>) {
    let r = cost.nrows();
    let (assignment, u, v) = solve_square(&pad_square(cost));
    let real: Vec<usize> = assignment[..r].to_vec();
    let total = real.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
    (real, total, u, v)
}

/// Solve the subproblem left after forcing rows `0..fixed_rows` to already
/// chosen columns: the remaining rows over the remaining columns. Returns the
/// assignment (in original column indices) and its cost.
fn solve_remainder(
    cost: &Array2<f64>,
    taken_cols: &[bool],
    fixed_rows: usize,
) -> (Vec<usize>, f64) {
    let (r, s) = cost.dim();
    let free_cols: Vec<usize> = (0..s).filter(|&c| !taken_cols[c]).collect();
    let free_rows = r - fixed_rows;
    if free_rows == 0 {
        return (Vec::new(), 0.0);
    }
    let sub = Array2::from_shape_fn((free_rows, free_cols.len()), |(i, j)| {
        cost[[fixed_rows + i, free_cols[j]]]
    });
    let (sub_assign, sub_total, _, _) = solve_padded(&sub);
    (
        sub_assign.into_iter().map(|j| free_cols[j]).collect(),
        sub_total,
    )
}

/// Minimum-cost assignment of each row to a distinct column (`rows <= cols`).
/// Ties are broken toward the lexicographically smallest assignment vector.
pub fn hungarian(cost: &Array2<f64>) -> Result<Vec<usize>, AssignmentError> {
    let (r, s) = cost.dim();
    if r > s {
        return Err(AssignmentError::ShapeError { rows: r, cols: s });
    }
    for ((i, j), &c) in cost.indexed_iter() {
        if !c.is_finite() {
            return Err(AssignmentError::NonFiniteCost { row: i, col: j });
        }
    }
    if r == 0 {
        return Ok(Vec::new());
    }
    let (mut current, total, u, v) = solve_padded(cost);
    let total_tol = 1e-9 * (1.0 + total.abs());

    let mut taken = vec![false; s];
    for i in 0..r {
        let prefix_cost: f64 = (0..i).map(|t| cost[[t, current[t]]]).sum();
        for c in 0..current[i] {
            if taken[c] {
                continue;
            }
            // Complementary slackness: an edge can appear in an optimal
            // solution only when its reduced cost is zero.
            let slack = cost[[i, c]] - u[i] - v[c];
            if slack.abs() > 1e-9 * (1.0 + cost[[i, c]].abs() + u[i].abs() + v[c].abs()) {
                continue;
            }
            let mut trial_taken = taken.clone();
            trial_taken[c] = true;
            let (rest, rest_total) = solve_remainder(cost, &trial_taken, i + 1);
            let trial_total = prefix_cost + cost[[i, c]] + rest_total;
            if (trial_total - total).abs() <= total_tol {
                current[i] = c;
                for (t, &col) in rest.iter().enumerate() {
                    current[i + 1 + t] = col;
                }
                break;
            }
        }
        taken[current[i]] = true;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream_rng;
    use ndarray::arr2;
    use rand::Rng;

    /// Exhaustive search over injective row -> column maps, first
    /// lexicographic optimum kept.
    fn brute_force(cost: &Array2<f64>) -> (Vec<usize>, f64) {
        let (r, s) = cost.dim();
        let mut best: Option<(Vec<usize>, f64)> = None;
        let mut stack = vec![0usize; r];
        fn recurse(
            cost: &Array2<f64>,
            row: usize,
            used: &mut Vec<bool>,
            pick: &mut Vec<usize>,
            best: &mut Option<(Vec<usize>, f64)>,
        ) {
            let (r, s) = cost.dim();
            if row == r {
                let total: f64 = (0..r).map(|i| cost[[i, pick[i]]]).sum();
                match best {
                    None => *best = Some((pick.clone(), total)),
                    Some((_, bt)) => {
                        if total < *bt {
                            *best = Some((pick.clone(), total));
                        }
                    }
                }
                return;
            }
            for c in 0..s {
                if !used[c] {
                    used[c] = true;
                    pick[row] = c;
                    recurse(cost, row + 1, used, pick, best);
                    used[c] = false;
                }
            }
        }
        let mut used = vec![false; s];
        recurse(cost, 0, &mut used, &mut stack, &mut best);
        best.expect("nonempty problem")
    }

    #[test]
    fn zero_diagonal_yields_identity_map() {
        let n = 4;
        let cost = Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { 10.0 });
        assert_eq!(hungarian(&cost).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn two_by_two_prefers_the_cheap_diagonal() {
        let cost = arr2(&[[1.0, 2.0], [2.0, 1.0]]);
        let assignment = hungarian(&cost).unwrap();
        assert_eq!(assignment, vec![0, 1]);
        let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
        assert_eq!(total, 2.0);
    }

    #[test]
    fn matches_brute_force_on_random_square_matrices() {
        for seed in 0..100u64 {
            let mut rng = stream_rng(seed, "hungarian");
            let n = rng.gen_range(1..=5);
            let cost = Array2::from_shape_fn((n, n), |_| rng.gen_range(0.0..1.0));
            let got = hungarian(&cost).unwrap();
            let (want, want_total) = brute_force(&cost);
            let got_total: f64 = got.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
            assert_eq!(got, want, "seed {seed}");
            assert_eq!(got_total, want_total, "seed {seed}");
        }
    }

    #[test]
    fn matches_brute_force_on_rectangular_matrices() {
        for seed in 0..60u64 {
            let mut rng = stream_rng(seed, "hungarian-rect");
            let r = rng.gen_range(1..=4);
            let s = rng.gen_range(r..=6);
            let cost = Array2::from_shape_fn((r, s), |_| rng.gen_range(-1.0..1.0));
            let got = hungarian(&cost).unwrap();
            let (want, _) = brute_force(&cost);
            assert_eq!(got, want, "seed {seed} cost {cost:?}");
        }
    }

    #[test]
    fn ties_break_to_the_lexicographically_smallest_vector() {
        // Fully tied: every assignment costs zero.
        let cost = Array2::zeros((3, 4));
        assert_eq!(hungarian(&cost).unwrap(), vec![0, 1, 2]);

        // Integer-valued costs with many exact ties.
        for seed in 0..100u64 {
            let mut rng = stream_rng(seed, "hungarian-ties");
            let n = rng.gen_range(2..=5);
            let cost = Array2::from_shape_fn((n, n), |_| rng.gen_range(0..3) as f64);
            let got = hungarian(&cost).unwrap();
            let (want, want_total) = brute_force(&cost);
            let got_total: f64 = got.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
            assert_eq!(got_total, want_total, "seed {seed}: wrong optimum");
            assert_eq!(got, want, "seed {seed}: not lexicographic ({cost:?})");
        }
    }

    #[test]
    fn more_rows_than_columns_is_a_shape_error() {
        let cost = Array2::zeros((3, 2));
        assert!(matches!(
            hungarian(&cost),
            Err(AssignmentError::ShapeError { rows: 3, cols: 2 })
        ));
    }

    #[test]
    fn non_finite_costs_are_rejected() {
        let mut cost = Array2::zeros((2, 2));
        cost[[1, 0]] = f64::INFINITY;
        assert!(matches!(
            hungarian(&cost),
            Err(AssignmentError::NonFiniteCost { row: 1, col: 0 })
        ));
    }
}
