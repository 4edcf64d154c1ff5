//! Reference computations the acceptance checks compare against. Each one is
//! written independently of the production code path it checks: exhaustive
//! enumeration instead of clever algorithms.

/// Plain full-matrix edit distance, divided by the longer length.
pub fn levenshtein_ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (n, m) = (a.len(), b.len());
    if n.max(m) == 0 {
        return 0.0;
    }
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    d[0] = (0..=m).collect();
    for i in 1..=n {
        for j in 1..=m {
            let sub = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + sub);
        }
    }
    d[n][m] as f64 / n.max(m) as f64
}

/// Minimum total cost over every matching of size `min(rows, cols)`,
/// by enumerating injective maps from the smaller side into the larger.
pub fn brute_force_min_cost(cost: &[Vec<f64>]) -> f64 {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let transposed = rows > cols;
    let (small, large) = if transposed { (cols, rows) } else { (rows, cols) };
    let at = |s: usize, l: usize| if transposed { cost[l][s] } else { cost[s][l] };
    let mut best = f64::INFINITY;
    let mut chosen = vec![0usize; small];
    let mut used = vec![false; large];
    fn go(
        k: usize,
        small: usize,
        large: usize,
        chosen: &mut Vec<usize>,
        used: &mut Vec<bool>,
        at: &dyn Fn(usize, usize) -> f64,
        best: &mut f64,
    ) {
        if k == small {
            let total: f64 = (0..small).map(|s| at(s, chosen[s])).sum();
            *best = best.min(total);
            return;
        }
        for l in 0..large {
            if !used[l] {
                used[l] = true;
                chosen[k] = l;
                go(k + 1, small, large, chosen, used, at, best);
                used[l] = false;
            }
        }
    }
    go(0, small, large, &mut chosen, &mut used, &at, &mut best);
    best
}

/// Two-sided signed-rank p-value by enumerating all `2^n` sign
/// assignments of the nonzero differences' average ranks: the share whose
/// positive-rank sum lies at least as far from the null centre as observed.
pub fn signed_rank_p(diffs: &[f64]) -> f64 {
    let d: Vec<f64> = diffs.iter().copied().filter(|v| *v != 0.0).collect();
    let n = d.len();
    assert!(n <= 20, "enumeration is limited to 20 pairs");
    let mags: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let rank: Vec<f64> = mags
        .iter()
        .map(|a| {
            let below = mags.iter().filter(|b| *b < a).count() as f64;
            let tied = mags.iter().filter(|b| *b == a).count() as f64;
            below + (tied + 1.0) / 2.0
        })
        .collect();
    let centre = rank.iter().sum::<f64>() / 2.0;
    let observed: f64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| rank[i]).sum();
    let gap = (observed - centre).abs();
    let mut extreme = 0u64;
    for mask in 0u64..(1u64 << n) {
        let w: f64 = (0..n).filter(|i| (mask >> i) & 1 == 1).map(|i| rank[i]).sum();
        if (w - centre).abs() >= gap - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / (1u64 << n) as f64
}

/// Crossings of two polylines by direct case analysis on consecutive
/// points: equal values count as a touch, opposite orderings on the two
/// ends of a segment count as a crossing.
pub fn pair_crossings(a: &[f64], b: &[f64]) -> usize {
    let mut n = 0;
    for i in 0..a.len() {
        if a[i] == b[i] {
            n += 1;
        }
        if i + 1 < a.len() {
            let above_then_below = a[i] > b[i] && a[i + 1] < b[i + 1];
            let below_then_above = a[i] < b[i] && a[i + 1] > b[i + 1];
            if above_then_below || below_then_above {
                n += 1;
            }
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_sanity() {
        assert_eq!(levenshtein_ratio("kitten", "sitting"), 3.0 / 7.0);
        assert_eq!(brute_force_min_cost(&[vec![4.0, 1.0], vec![2.0, 0.0], vec![0.5, 9.0]]), 0.5);
        // One positive difference among five: W+ = 1 or 5 extreme both ways.
        let p = signed_rank_p(&[1.0, -2.0, -3.0, -4.0, -5.0]);
        assert_eq!(p, 4.0 / 32.0);
        assert_eq!(pair_crossings(&[1.0, 3.0], &[3.0, 1.0]), 1);
        assert_eq!(pair_crossings(&[1.0, 2.0, 1.0], &[3.0, 2.0, 3.0]), 1);
    }
}
