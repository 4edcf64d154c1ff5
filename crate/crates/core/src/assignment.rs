//! Rectangular minimal-cost assignment (Hungarian method with potentials).
//!
//! Matches `min(rows, cols)` pairs. [`min_cost_matching`] additionally breaks
//! ties between equal-cost optima toward the lexicographically smallest list
//! of `(row, col)` pairs.

use alloc::vec;
use alloc::vec::Vec;

/// Tolerance used when comparing total costs of alternative matchings.
const COST_EPS: f64 = 1e-9;

/// Above this many cost-matrix entries the lexicographic tie-break is skipped
/// and the solver's own scan order decides ties.
const TIE_BREAK_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

/// Minimal-total-cost matching of size `min(rows, cols)` over a dense,
/// rectangular cost matrix with finite entries.
pub fn solve(cost: &[Vec<f64>]) -> Matching {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Matching {
            pairs: Vec::new(),
            total_cost: 0.0,
        };
    }
    debug_assert!(cost.iter().all(|r| r.len() == cols));

    let mut pairs = if rows <= cols {
        hungarian(rows, cols, |i, j| cost[i][j])
    } else {
        hungarian(cols, rows, |i, j| cost[j][i])
            .into_iter()
            .map(|(c, r)| (r, c))
            .collect()
    };
    pairs.sort_unstable();
    let total_cost = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
    Matching { pairs, total_cost }
}

/// Like [`solve`], but among all optimal matchings returns the one whose
/// sorted pair list is lexicographically smallest (for matrices up to
/// `TIE_BREAK_LIMIT` entries).
pub fn min_cost_matching(cost: &[Vec<f64>]) -> Matching {
    let optimum = solve(cost);
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows * cols > TIE_BREAK_LIMIT || optimum.pairs.is_empty() {
        return optimum;
    }

    let target = optimum.total_cost;
    let tol = COST_EPS * libm::fmax(1.0, libm::fabs(target));
    let mut free_rows: Vec<usize> = (0..rows).collect();
    let mut free_cols: Vec<usize> = (0..cols).collect();
    let mut fixed_cost = 0.0;
    let mut pairs = Vec::with_capacity(optimum.pairs.len());
    let size = optimum.pairs.len();

    for i in 0..rows {
        if pairs.len() == size {
            break;
        }
        free_rows.retain(|&r| r != i);
        let mut chosen = None;
        for &j in &free_cols {
            let rest_cols: Vec<usize> = free_cols.iter().copied().filter(|&c| c != j).collect();
            let rest = sub_solve(cost, &free_rows, &rest_cols);
            if rest.pairs.len() + pairs.len() + 1 == size
                && fixed_cost + cost[i][j] + rest.total_cost <= target + tol
            {
                chosen = Some(j);
                break;
            }
        }
        if let Some(j) = chosen {
            fixed_cost += cost[i][j];
            pairs.push((i, j));
            free_cols.retain(|&c| c != j);
        }
        // Otherwise row i stays unmatched; feasibility of that is implied
        // by the optimum existing.
    }
    Matching {
        total_cost: pairs.iter().map(|&(i, j)| cost[i][j]).sum(),
        pairs,
    }
}

fn sub_solve(cost: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> Matching {
    let sub: Vec<Vec<f64>> = rows
        .iter()
        .map(|&r| cols.iter().map(|&c| cost[r][c]).collect())
        .collect();
    if cols.is_empty() {
        return Matching {
            pairs: Vec::new(),
            total_cost: 0.0,
        };
    }
    solve(&sub)
}

/// Shortest augmenting path Hungarian algorithm for `n <= m`.
/// Returns `(row, col)` for every row.
fn hungarian(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    // p[j]: row (1-based) matched to column j; 0 means free.
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    (1..=m)
        .filter(|&j| p[j] != 0)
        .map(|j| (p[j] - 1, j - 1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive minimum over all matchings of size min(rows, cols).
    fn brute_force(cost: &[Vec<f64>]) -> f64 {
        fn go(cost: &[Vec<f64>], i: usize, used: &mut Vec<bool>, left: usize) -> f64 {
            if left == 0 {
                return 0.0;
            }
            if cost.len() - i < left {
                return f64::INFINITY;
            }
            // Skip row i.
            let mut best = go(cost, i + 1, used, left);
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[i][j] + go(cost, i + 1, used, left - 1));
                    used[j] = false;
                }
            }
            best
        }
        let cols = cost.first().map_or(0, Vec::len);
        let size = cost.len().min(cols);
        go(cost, 0, &mut vec![false; cols], size)
    }

    #[test]
    fn small_square() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let m = solve(&cost);
        assert_eq!(m.total_cost, 5.0);
        assert_eq!(m.pairs, vec![(0, 1), (1, 0), (2, 2)]);
    }

    #[test]
    fn rectangular_both_ways() {
        let wide = vec![vec![5.0, 1.0, 9.0, 0.5]];
        assert_eq!(solve(&wide).pairs, vec![(0, 3)]);
        let tall = vec![vec![5.0], vec![1.0], vec![9.0]];
        assert_eq!(solve(&tall).pairs, vec![(1, 0)]);
    }

    #[test]
    fn empty_inputs() {
        assert!(solve(&[]).pairs.is_empty());
        assert!(solve(&[vec![]]).pairs.is_empty());
    }

    #[test]
    fn ties_resolve_lexicographically() {
        let cost = vec![vec![0.0; 3]; 3];
        assert_eq!(min_cost_matching(&cost).pairs, vec![(0, 0), (1, 1), (2, 2)]);
        // Rows 0 and 1 are interchangeable; the smaller pair list wins.
        let cost = vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![0.0, 5.0]];
        assert_eq!(min_cost_matching(&cost).pairs, vec![(0, 1), (2, 0)]);
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            rows in 1usize..=5,
            cols in 1usize..=5,
            seed in proptest::collection::vec(0u8..20, 25),
        ) {
            let cost: Vec<Vec<f64>> = (0..rows)
                .map(|i| (0..cols).map(|j| f64::from(seed[i * 5 + j]) / 4.0).collect())
                .collect();
            let expected = brute_force(&cost);
            let m = solve(&cost);
            prop_assert_eq!(m.pairs.len(), rows.min(cols));
            prop_assert!((m.total_cost - expected).abs() < 1e-9);
            let lex = min_cost_matching(&cost);
            prop_assert!((lex.total_cost - expected).abs() < 1e-9);
            prop_assert!(lex.pairs <= m.pairs);
            let mut seen_rows = alloc::collections::BTreeSet::new();
            let mut seen_cols = alloc::collections::BTreeSet::new();
            for (i, j) in lex.pairs {
                prop_assert!(seen_rows.insert(i) && seen_cols.insert(j));
            }
        }
    }
}
