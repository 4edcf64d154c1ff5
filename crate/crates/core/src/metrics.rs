//! Tick-based error metrics for chart-to-table predictions.
//!
//! The numeric distance between a ground-truth value `g` and a prediction
//! `p` is measured in units of `t`, the estimated minor tick interval of the
//! chart (one fifth of the major interval):
//!
//! | distance        | definition                    |
//! |-----------------|-------------------------------|
//! | [`d_rms`]       | `min(1, |g - p| / |g|)`       |
//! | [`d_tbe`]       | `min(1, |g - p| / t)`         |
//! | [`d_tbe_sig`]   | `1{ |g - p| / t >= 1 }`       |
//! | [`d_tbe_raw`]   | `|g - p| / t`                 |
//!
//! Table-level scores flatten both tables into `(row, column, value)`
//! datapoints, align them with a minimal-cost matching and aggregate matched
//! similarities into precision (over `n` predicted datapoints), recall (over
//! `m` truth datapoints) and their harmonic mean.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::assignment::{min_cost_matching, Matching};
use crate::parse::canonicalize_header;
use crate::table::{AxisSpec, DataTable, Datapoint};
use crate::{Cell, Error, Result};

/// Edit distance with unit costs divided by the longer length (in chars).
pub fn normalized_levenshtein(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 0.0;
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = alloc::vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitute.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()] as f64 / longest as f64
}

/// Relative distance. For `g == 0` it is 0 when `p == 0` and 1 otherwise.
pub fn d_rms(g: f64, p: f64) -> f64 {
    if g == 0.0 {
        return if p == 0.0 { 0.0 } else { 1.0 };
    }
    libm::fmin(1.0, libm::fabs(g - p) / libm::fabs(g))
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveTick(t))
    }
}

pub fn d_tbe(g: f64, p: f64, t: f64) -> Result<f64> {
    Ok(libm::fmin(1.0, d_tbe_raw(g, p, t)?))
}

/// 1 when the error reaches one minor tick (inclusive), else 0.
pub fn d_tbe_sig(g: f64, p: f64, t: f64) -> Result<f64> {
    Ok(if d_tbe_raw(g, p, t)? >= 1.0 { 1.0 } else { 0.0 })
}

pub fn d_tbe_raw(g: f64, p: f64, t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(libm::fabs(g - p) / t)
}

/// One matched datapoint pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedPair {
    /// Index into the predicted table's row-major datapoints.
    pub pred: usize,
    /// Index into the truth table's row-major datapoints.
    pub truth: usize,
    /// Matching cost of the pair (header distance for header alignment).
    pub cost: f64,
}

/// A partial matching between predicted and truth datapoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub pairs: Vec<AlignedPair>,
    pub n_pred: usize,
    pub n_truth: usize,
    pub total_cost: f64,
}

impl Alignment {
    fn from_matching(m: Matching, cost: &[Vec<f64>], n_pred: usize, n_truth: usize) -> Self {
        Self {
            pairs: m
                .pairs
                .iter()
                .map(|&(i, j)| AlignedPair {
                    pred: i,
                    truth: j,
                    cost: cost[i][j],
                })
                .collect(),
            n_pred,
            n_truth,
            total_cost: m.total_cost,
        }
    }

    pub fn unmatched_pred(&self) -> usize {
        self.n_pred - self.pairs.len()
    }

    pub fn unmatched_truth(&self) -> usize {
        self.n_truth - self.pairs.len()
    }
}

struct Flat<'a> {
    points: Vec<Datapoint<'a>>,
    rows: Vec<alloc::string::String>,
    cols: Vec<alloc::string::String>,
}

fn flatten(table: &DataTable) -> Flat<'_> {
    let points: Vec<Datapoint<'_>> = table.datapoints().collect();
    let rows = points.iter().map(|d| canonicalize_header(d.row)).collect();
    let cols = points.iter().map(|d| canonicalize_header(d.col)).collect();
    Flat { points, rows, cols }
}

/// Header distance of two datapoints: the mean of the normalized Levenshtein
/// distances of their canonical row headers and column headers.
pub fn header_cost(truth_row: &str, truth_col: &str, pred_row: &str, pred_col: &str) -> f64 {
    let row = normalized_levenshtein(&canonicalize_header(truth_row), &canonicalize_header(pred_row));
    let col = normalized_levenshtein(&canonicalize_header(truth_col), &canonicalize_header(pred_col));
    (row + col) / 2.0
}

fn header_cost_matrix(truth: &Flat<'_>, pred: &Flat<'_>) -> Vec<Vec<f64>> {
    (0..pred.points.len())
        .map(|i| {
            (0..truth.points.len())
                .map(|j| {
                    let row = normalized_levenshtein(&truth.rows[j], &pred.rows[i]);
                    let col = normalized_levenshtein(&truth.cols[j], &pred.cols[i]);
                    (row + col) / 2.0
                })
                .collect()
        })
        .collect()
}

/// Aligns datapoints by header distance alone.
pub fn match_headers(truth: &DataTable, pred: &DataTable) -> Alignment {
    let (t, p) = (flatten(truth), flatten(pred));
    let cost = header_cost_matrix(&t, &p);
    Alignment::from_matching(min_cost_matching(&cost), &cost, p.points.len(), t.points.len())
}

fn tbe_or_max(g: f64, p: Cell, t: f64) -> Result<f64> {
    match p {
        Some(p) => d_tbe(g, p, t),
        None => Ok(1.0),
    }
}

/// Aligns datapoints by clamped tick-based value distance, ignoring headers.
pub fn match_values(truth: &DataTable, pred: &DataTable, t: f64) -> Result<Alignment> {
    check_t(t)?;
    let (tp, pp) = (flatten(truth), flatten(pred));
    let mut cost = Vec::with_capacity(pp.points.len());
    for p in &pp.points {
        let mut row = Vec::with_capacity(tp.points.len());
        for g in &tp.points {
            row.push(tbe_or_max(truth_value(g), p.value, t)?);
        }
        cost.push(row);
    }
    Ok(Alignment::from_matching(min_cost_matching(&cost), &cost, pp.points.len(), tp.points.len()))
}

fn truth_value(d: &Datapoint<'_>) -> f64 {
    // Ground-truth cells are always present; treat a stray gap as zero.
    d.value.unwrap_or(0.0)
}

fn f1(similarity_sum: f64, n_pred: usize, n_truth: usize) -> f64 {
    let precision = if n_pred > 0 { similarity_sum / n_pred as f64 } else { 0.0 };
    let recall = if n_truth > 0 { similarity_sum / n_truth as f64 } else { 0.0 };
    if precision + recall <= 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn axis_t(axis: &AxisSpec) -> Result<f64> {
    check_t(axis.minor_estimate_t)?;
    Ok(axis.minor_estimate_t)
}

/// Sum over aligned pairs of `similarity(g, p)`.
fn aligned_sum(
    truth: &DataTable,
    pred: &DataTable,
    alignment: &Alignment,
    mut similarity: impl FnMut(f64, Cell) -> Result<f64>,
) -> Result<f64> {
    let t_points: Vec<Datapoint<'_>> = truth.datapoints().collect();
    let p_points: Vec<Datapoint<'_>> = pred.datapoints().collect();
    let mut sum = 0.0;
    for pair in &alignment.pairs {
        sum += similarity(truth_value(&t_points[pair.truth]), p_points[pair.pred].value)?;
    }
    Ok(sum)
}

fn tbe_f1_with(truth: &DataTable, pred: &DataTable, alignment: &Alignment, t: f64) -> Result<f64> {
    let sum = aligned_sum(truth, pred, alignment, |g, p| Ok(1.0 - tbe_or_max(g, p, t)?))?;
    Ok(f1(sum, alignment.n_pred, alignment.n_truth))
}

/// F1 of `1 - d_tbe` over header-aligned datapoints. Header distance only
/// decides the alignment; it does not discount matched cells.
pub fn rms_tbe_f1(truth: &DataTable, pred: &DataTable, axis: &AxisSpec) -> Result<f64> {
    let t = axis_t(axis)?;
    tbe_f1_with(truth, pred, &match_headers(truth, pred), t)
}

/// How sub-threshold pairs enter the significant-deviation F1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigAggregation {
    /// Every matched pair counts; sub-threshold pairs score as fully correct.
    #[default]
    AllPairs,
    /// Matched pairs within the threshold are removed from the numerator and
    /// from both denominators.
    SignificantOnly,
}

fn sig_f1_with(
    truth: &DataTable,
    pred: &DataTable,
    alignment: &Alignment,
    t: f64,
    mode: SigAggregation,
) -> Result<(f64, usize)> {
    let t_points: Vec<Datapoint<'_>> = truth.datapoints().collect();
    let p_points: Vec<Datapoint<'_>> = pred.datapoints().collect();
    let mut sum = 0.0;
    let mut significant = 0;
    for pair in &alignment.pairs {
        let g = truth_value(&t_points[pair.truth]);
        let d = match p_points[pair.pred].value {
            Some(p) => d_tbe_sig(g, p, t)?,
            None => 1.0,
        };
        if d > 0.0 {
            significant += 1;
        }
        sum += 1.0 - d;
    }
    let score = match mode {
        SigAggregation::AllPairs => f1(sum, alignment.n_pred, alignment.n_truth),
        SigAggregation::SignificantOnly => {
            let within = alignment.pairs.len() - significant;
            let n = alignment.n_pred - within;
            let m = alignment.n_truth - within;
            if n == 0 && m == 0 {
                1.0
            } else {
                // Only significant pairs remain, each contributing 0.
                f1(sum - within as f64, n, m)
            }
        }
    };
    Ok((score, significant))
}

/// F1 counting only deviations of at least one minor tick as errors.
pub fn rms_tbe_f1_sig(truth: &DataTable, pred: &DataTable, axis: &AxisSpec) -> Result<f64> {
    rms_tbe_f1_sig_with(truth, pred, axis, SigAggregation::AllPairs)
}

pub fn rms_tbe_f1_sig_with(
    truth: &DataTable,
    pred: &DataTable,
    axis: &AxisSpec,
    mode: SigAggregation,
) -> Result<f64> {
    let t = axis_t(axis)?;
    Ok(sig_f1_with(truth, pred, &match_headers(truth, pred), t, mode)?.0)
}

fn raw_with(truth: &DataTable, pred: &DataTable, alignment: &Alignment, t: f64) -> Result<f64> {
    let mut total = aligned_sum(truth, pred, alignment, |g, p| match p {
        Some(p) => d_tbe_raw(g, p, t),
        None => Ok(libm::fabs(g) / t),
    })?;
    let t_points: Vec<Datapoint<'_>> = truth.datapoints().collect();
    let p_points: Vec<Datapoint<'_>> = pred.datapoints().collect();
    let mut matched_truth = alloc::vec![false; t_points.len()];
    let mut matched_pred = alloc::vec![false; p_points.len()];
    for pair in &alignment.pairs {
        matched_truth[pair.truth] = true;
        matched_pred[pair.pred] = true;
    }
    for (d, _) in t_points.iter().zip(&matched_truth).filter(|(_, m)| !**m) {
        total += libm::fabs(truth_value(d)) / t;
    }
    for (d, _) in p_points.iter().zip(&matched_pred).filter(|(_, m)| !**m) {
        total += libm::fabs(d.value.unwrap_or(0.0)) / t;
    }
    let count = alignment.pairs.len() + alignment.unmatched_truth() + alignment.unmatched_pred();
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// Mean unclamped tick-based error. Unmatched datapoints contribute
/// `|value| / t`.
pub fn tbe_raw_score(truth: &DataTable, pred: &DataTable, axis: &AxisSpec) -> Result<f64> {
    let t = axis_t(axis)?;
    raw_with(truth, pred, &match_headers(truth, pred), t)
}

/// F1 of `1 - d_tbe` over a value-only minimal-cost matching.
pub fn rnss_tbe_f1(truth: &DataTable, pred: &DataTable, axis: &AxisSpec) -> Result<f64> {
    let t = axis_t(axis)?;
    tbe_f1_with(truth, pred, &match_values(truth, pred, t)?, t)
}

/// Swapping error score: value-only similarity minus header-aligned similarity.
pub fn ses(truth: &DataTable, pred: &DataTable, axis: &AxisSpec) -> Result<f64> {
    Ok(rnss_tbe_f1(truth, pred, axis)? - rms_tbe_f1(truth, pred, axis)?)
}

fn baseline_similarity(header: f64, g: f64, p: Cell) -> f64 {
    match p {
        Some(p) => (1.0 - header) * (1.0 - d_rms(g, p)),
        None => 0.0,
    }
}

/// Relative-distance F1 in the original style. Datapoints are matched on
/// the combined similarity `(1 - header distance) * (1 - d_rms)`; the score
/// then uses that product, or only `1 - d_rms` when `with_header_scores` is
/// false.
pub fn rms_f1_baseline(truth: &DataTable, pred: &DataTable, with_header_scores: bool) -> f64 {
    let (tf, pf) = (flatten(truth), flatten(pred));
    let header = header_cost_matrix(&tf, &pf);
    let cost: Vec<Vec<f64>> = header
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, h)| 1.0 - baseline_similarity(*h, truth_value(&tf.points[j]), pf.points[i].value))
                .collect()
        })
        .collect();
    let matching = min_cost_matching(&cost);
    let sum: f64 = matching
        .pairs
        .iter()
        .map(|&(i, j)| {
            let h = if with_header_scores { header[i][j] } else { 0.0 };
            baseline_similarity(h, truth_value(&tf.points[j]), pf.points[i].value)
        })
        .sum();
    f1(sum, pf.points.len(), tf.points.len())
}

/// Per-prediction metric bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub rms_f1: f64,
    pub rms_f1_no_header: f64,
    pub rms_tbe_f1: f64,
    pub rms_tbe_f1_sig: f64,
    pub tbe_raw: f64,
    pub rnss_tbe_f1: f64,
    pub ses: f64,
    /// Matched pairs whose error reaches one minor tick (absent cells included).
    pub n_sig_cells: usize,
    pub t_used: f64,
    pub matched: usize,
    pub unmatched_truth: usize,
    pub unmatched_pred: usize,
}

impl ScoreRecord {
    /// Bounded metrics lie in their ranges and SES is consistent.
    pub fn is_consistent(&self) -> bool {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        unit(self.rms_f1)
            && unit(self.rms_f1_no_header)
            && unit(self.rms_tbe_f1)
            && unit(self.rms_tbe_f1_sig)
            && unit(self.rnss_tbe_f1)
            && (-1.0..=1.0).contains(&self.ses)
            && self.tbe_raw >= 0.0
            && self.ses == self.rnss_tbe_f1 - self.rms_tbe_f1
    }
}

/// Scores a prediction against its ground truth, computing each alignment once.
pub fn score(truth: &DataTable, pred: &DataTable, axis: &AxisSpec) -> Result<ScoreRecord> {
    let t = axis_t(axis)?;
    let headers = match_headers(truth, pred);
    let values = match_values(truth, pred, t)?;
    let rms_tbe_f1 = tbe_f1_with(truth, pred, &headers, t)?;
    let rnss_tbe_f1 = tbe_f1_with(truth, pred, &values, t)?;
    let (rms_tbe_f1_sig, n_sig_cells) = sig_f1_with(truth, pred, &headers, t, SigAggregation::AllPairs)?;
    Ok(ScoreRecord {
        rms_f1: rms_f1_baseline(truth, pred, true),
        rms_f1_no_header: rms_f1_baseline(truth, pred, false),
        rms_tbe_f1,
        rms_tbe_f1_sig,
        tbe_raw: raw_with(truth, pred, &headers, t)?,
        rnss_tbe_f1,
        ses: rnss_tbe_f1 - rms_tbe_f1,
        n_sig_cells,
        t_used: t,
        matched: headers.pairs.len(),
        unmatched_truth: headers.unmatched_truth(),
        unmatched_pred: headers.unmatched_pred(),
    })
}
