//! Dataset imbalance, correlation, crossing counts, paired Wilcoxon tests and
//! grouped aggregation of score records.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::metrics::ScoreRecord;
use crate::numformat::TickFormat;
use crate::{BenchmarkItem, ChartType, Condition, DataTable, Error, Result};

/// Default significance level.
pub const ALPHA: f64 = 0.05;

/// Largest number of nonzero pairs for which `Auto` uses the exact null
/// distribution.
pub const EXACT_LIMIT: usize = 25;

/// Fewest nonzero differences a signed-rank test accepts.
pub const MIN_PAIRS: usize = 5;

/// Population standard deviation over mean of per-bucket counts.
pub fn coefficient_of_variation(counts: &[u64]) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::ZeroMean);
    }
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::ZeroMean);
    }
    let var = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    Ok(libm::sqrt(var) / mean)
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossings {
    pub total: usize,
    pub avg_per_entity: f64,
}

/// Counts where entity polylines cross or touch.
///
/// Each column is an entity drawn over the row indices. For every pair of
/// entities this counts segments whose difference changes sign strictly
/// between consecutive rows, plus rows where both share the same value.
/// Absent cells break the polyline and contribute nothing.
pub fn count_crossings(table: &DataTable) -> Result<Crossings> {
    let entities = table.n_cols();
    let rows = table.n_rows();
    if entities < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: entities });
    }
    if rows < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: rows });
    }
    let mut total = 0;
    for a in 0..entities {
        for b in a + 1..entities {
            let diff: Vec<Option<f64>> = (0..rows)
                .map(|r| Some(table.get(r, a)? - table.get(r, b)?))
                .collect();
            total += diff.iter().filter(|d| **d == Some(0.0)).count();
            total += diff
                .windows(2)
                .filter(|w| matches!(w, [Some(p), Some(q)] if p * q < 0.0))
                .count();
        }
    }
    Ok(Crossings {
        total,
        avg_per_entity: total as f64 / entities as f64,
    })
}

/// Mean crossings per entity, grouped by entity count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingTrend {
    /// `(entity_count, tables, mean avg_per_entity)` in ascending entity count.
    pub groups: Vec<(usize, usize, f64)>,
    /// Correlation of entity count with the per-table average.
    pub per_table_pearson: f64,
    /// Correlation of entity count with the group means.
    pub per_group_pearson: f64,
}

impl CrossingTrend {
    pub fn strictly_increasing(&self) -> bool {
        self.groups.windows(2).all(|w| w[1].2 > w[0].2)
    }
}

/// Crossing statistics over a set of tables; tables with fewer than two
/// entities are skipped.
pub fn crossing_trend<'a>(tables: impl IntoIterator<Item = &'a DataTable>) -> Result<CrossingTrend> {
    let mut by_count: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for t in tables {
        if t.n_cols() < 2 {
            continue;
        }
        let c = count_crossings(t)?;
        by_count.entry(t.n_cols()).or_default().push(c.avg_per_entity);
        xs.push(t.n_cols() as f64);
        ys.push(c.avg_per_entity);
    }
    let groups: Vec<(usize, usize, f64)> = by_count
        .into_iter()
        .map(|(k, v)| (k, v.len(), v.iter().sum::<f64>() / v.len() as f64))
        .collect();
    let gx: Vec<f64> = groups.iter().map(|g| g.0 as f64).collect();
    let gy: Vec<f64> = groups.iter().map(|g| g.2).collect();
    Ok(CrossingTrend {
        per_table_pearson: pearson(&xs, &ys)?,
        per_group_pearson: pearson(&gx, &gy)?,
        groups,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    BaseBetter,
    ComparedBetter,
    NoDifference,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::BaseBetter => Direction::ComparedBetter,
            Direction::ComparedBetter => Direction::BaseBetter,
            Direction::NoDifference => Direction::NoDifference,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::BaseBetter => "base_better",
            Direction::ComparedBetter => "compared_better",
            Direction::NoDifference => "no_difference",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub p_value: f64,
    /// Nonzero differences that entered the test.
    pub n_pairs: usize,
    /// `BaseBetter` when `x` exceeds `y` on average and the test is
    /// significant.
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WilcoxonMode {
    /// Exact up to [`EXACT_LIMIT`] nonzero pairs, normal approximation above.
    #[default]
    Auto,
    Exact,
    Normal,
}

/// Two-sided paired Wilcoxon signed-rank test at [`ALPHA`].
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<TestResult> {
    wilcoxon_signed_rank_with(x, y, WilcoxonMode::Auto, ALPHA)
}

pub fn wilcoxon_signed_rank_with(
    x: &[f64],
    y: &[f64],
    mode: WilcoxonMode,
    alpha: f64,
) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let mut diffs = Vec::with_capacity(x.len());
    for (&a, &b) in x.iter().zip(y) {
        let d = a - b;
        if !d.is_finite() {
            return Err(Error::NonFinite(d));
        }
        if d != 0.0 {
            diffs.push(d);
        }
    }
    let n = diffs.len();
    if n == 0 {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
            n_pairs: 0,
            direction: Direction::NoDifference,
        });
    }
    if n < MIN_PAIRS {
        return Err(Error::TooFewObservations { needed: MIN_PAIRS, got: n });
    }

    let (ranks, tie_sizes) = doubled_ranks(&diffs);
    // All sums below are in doubled-rank units so they stay integral.
    let w_plus2: u64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, &r)| r)
        .sum();
    let total2 = (n * (n + 1)) as u64;
    let w_min2 = w_plus2.min(total2 - w_plus2);

    let exact = match mode {
        WilcoxonMode::Exact => true,
        WilcoxonMode::Normal => false,
        WilcoxonMode::Auto => n <= EXACT_LIMIT,
    };
    let p_value = if exact {
        let dist = doubled_null_distribution(&ranks);
        let lower: f64 = dist[..=w_min2 as usize].iter().sum();
        (2.0 * lower).min(1.0)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let ties: f64 = tie_sizes.iter().map(|&t| {
            let t = t as f64;
            t * t * t - t
        }).sum();
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
        if var <= 0.0 {
            1.0
        } else {
            let w_plus = w_plus2 as f64 / 2.0;
            let z = ((w_plus - mean).abs() - 0.5).max(0.0) / libm::sqrt(var);
            libm::erfc(z / core::f64::consts::SQRT_2).min(1.0)
        }
    };

    let mean_diff = diffs.iter().sum::<f64>() / n as f64;
    let direction = if p_value >= alpha || mean_diff == 0.0 {
        Direction::NoDifference
    } else if mean_diff > 0.0 {
        Direction::BaseBetter
    } else {
        Direction::ComparedBetter
    };
    Ok(TestResult {
        statistic: w_min2 as f64 / 2.0,
        p_value,
        n_pairs: n,
        direction,
    })
}

/// Twice the average rank of each |difference|, plus the size of each tie
/// group.
fn doubled_ranks(diffs: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&a, &b| libm::fabs(diffs[a]).total_cmp(&libm::fabs(diffs[b])));
    let mut ranks = vec![0u64; diffs.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let key = libm::fabs(diffs[order[start]]);
        let mut end = start + 1;
        while end < order.len() && libm::fabs(diffs[order[end]]) == key {
            end += 1;
        }
        // Ranks start..end are 1-based start+1..=end; twice their mean.
        let doubled = (start + 1 + end) as u64;
        for &i in &order[start..end] {
            ranks[i] = doubled;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

/// Null distribution of the doubled positive-rank sum: each rank joins the
/// sum with probability one half.
fn doubled_null_distribution(ranks: &[u64]) -> Vec<f64> {
    let total: usize = ranks.iter().map(|&r| r as usize).sum();
    let mut dist = vec![0.0; total + 1];
    dist[0] = 1.0;
    let mut reach = 0;
    for &r in ranks {
        let r = r as usize;
        reach += r;
        for s in (0..=reach).rev() {
            let with = if s >= r { dist[s - r] } else { 0.0 };
            dist[s] = 0.5 * dist[s] + 0.5 * with;
        }
    }
    dist
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RmsF1,
    RmsF1NoHeader,
    RmsTbeF1,
    RmsTbeF1Sig,
    TbeRaw,
    RnssTbeF1,
    Ses,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::RmsF1,
        Metric::RmsF1NoHeader,
        Metric::RmsTbeF1,
        Metric::RmsTbeF1Sig,
        Metric::TbeRaw,
        Metric::RnssTbeF1,
        Metric::Ses,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::RmsF1 => "rms_f1",
            Metric::RmsF1NoHeader => "rms_f1_no_header",
            Metric::RmsTbeF1 => "rms_tbe_f1",
            Metric::RmsTbeF1Sig => "rms_tbe_f1_sig",
            Metric::TbeRaw => "tbe_raw",
            Metric::RnssTbeF1 => "rnss_tbe_f1",
            Metric::Ses => "ses",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str().eq_ignore_ascii_case(s))
    }

    pub fn value(self, r: &ScoreRecord) -> f64 {
        match self {
            Metric::RmsF1 => r.rms_f1,
            Metric::RmsF1NoHeader => r.rms_f1_no_header,
            Metric::RmsTbeF1 => r.rms_tbe_f1,
            Metric::RmsTbeF1Sig => r.rms_tbe_f1_sig,
            Metric::TbeRaw => r.tbe_raw,
            Metric::RnssTbeF1 => r.rnss_tbe_f1,
            Metric::Ses => r.ses,
        }
    }

    /// Fractions (reported as percentages); TBE-Raw is in units of `t`.
    pub fn is_bounded(self) -> bool {
        self != Metric::TbeRaw
    }

    /// Error-like metrics where smaller values are better.
    pub fn lower_is_better(self) -> bool {
        matches!(self, Metric::TbeRaw | Metric::Ses)
    }

    /// Value in reporting units.
    pub fn reported(self, r: &ScoreRecord) -> f64 {
        let v = self.value(r);
        if self.is_bounded() {
            v * 100.0
        } else {
            v
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dimension {
    DigitLength,
    EntityCount,
    MajorTicks,
    RangeVariant,
    Format,
    ChartType,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Dimension::DigitLength,
        Dimension::EntityCount,
        Dimension::MajorTicks,
        Dimension::RangeVariant,
        Dimension::Format,
        Dimension::ChartType,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::DigitLength => "digit_length",
            Dimension::EntityCount => "entity_count",
            Dimension::MajorTicks => "major_ticks",
            Dimension::RangeVariant => "range_variant",
            Dimension::Format => "format",
            Dimension::ChartType => "chart_type",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.as_str().eq_ignore_ascii_case(s))
    }

    /// Every legal group of this dimension in natural order.
    pub fn legal_keys(self) -> Vec<GroupKey> {
        match self {
            Dimension::DigitLength => (0..=16).map(GroupKey::DigitLength).collect(),
            Dimension::EntityCount => (1..=6).map(GroupKey::EntityCount).collect(),
            Dimension::MajorTicks => [3, 6, 11].into_iter().map(GroupKey::MajorTicks).collect(),
            Dimension::RangeVariant => [Condition::Base, Condition::Pos, Condition::Neg, Condition::Ext]
                .into_iter()
                .map(GroupKey::RangeVariant)
                .collect(),
            Dimension::Format => [
                TickFormat::Plain,
                TickFormat::Comma,
                TickFormat::Scientific,
                TickFormat::Abbrev,
            ]
            .into_iter()
            .map(GroupKey::Format)
            .collect(),
            Dimension::ChartType => ChartType::ALL.into_iter().map(GroupKey::ChartType).collect(),
        }
    }

    /// The group an item falls in, or `None` when the item does not vary
    /// along this dimension (e.g. a format variant has no range variant).
    /// Part-A base items belong to every dimension as the reference group.
    pub fn key(self, item: &BenchmarkItem) -> Option<GroupKey> {
        let c = item.condition;
        match self {
            Dimension::DigitLength => Some(GroupKey::DigitLength(item.digit_length)),
            Dimension::EntityCount => Some(GroupKey::EntityCount(item.entity_count)),
            Dimension::ChartType => Some(GroupKey::ChartType(item.chart_type)),
            Dimension::MajorTicks => matches!(c, Condition::Base | Condition::Ticks3 | Condition::Ticks11)
                .then(|| GroupKey::MajorTicks(item.axis.n_major_ticks as u8)),
            Dimension::RangeVariant => {
                matches!(c, Condition::Base | Condition::Pos | Condition::Neg | Condition::Ext)
                    .then_some(GroupKey::RangeVariant(c))
            }
            Dimension::Format => matches!(c, Condition::Base | Condition::Comma | Condition::Sci | Condition::Abbr)
                .then_some(GroupKey::Format(item.axis.format)),
        }
    }
}

/// One group along a [`Dimension`]; derives the dimension's natural order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GroupKey {
    DigitLength(u8),
    EntityCount(u8),
    MajorTicks(u8),
    RangeVariant(Condition),
    Format(TickFormat),
    ChartType(ChartType),
}

impl GroupKey {
    pub fn dimension(self) -> Dimension {
        match self {
            GroupKey::DigitLength(_) => Dimension::DigitLength,
            GroupKey::EntityCount(_) => Dimension::EntityCount,
            GroupKey::MajorTicks(_) => Dimension::MajorTicks,
            GroupKey::RangeVariant(_) => Dimension::RangeVariant,
            GroupKey::Format(_) => Dimension::Format,
            GroupKey::ChartType(_) => Dimension::ChartType,
        }
    }

    /// The group value as a label, e.g. `"4"` or `"neg"`.
    pub fn label(self) -> String {
        match self {
            GroupKey::DigitLength(v) | GroupKey::EntityCount(v) | GroupKey::MajorTicks(v) => format!("{v}"),
            GroupKey::RangeVariant(c) => c.as_str().into(),
            GroupKey::Format(f) => f.as_str().into(),
            GroupKey::ChartType(t) => t.as_str().into(),
        }
    }
}

/// A score joined with the item it was computed for.
#[derive(Debug, Clone, Copy)]
pub struct Scored<'a> {
    pub item: &'a BenchmarkItem,
    pub record: &'a ScoreRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub key: GroupKey,
    pub n: usize,
    /// Mean per metric in [`Metric::ALL`] order, in reporting units.
    pub means: Vec<f64>,
}

impl GroupRow {
    pub fn mean(&self, m: Metric) -> f64 {
        self.means[m as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregation {
    pub dimension: Dimension,
    pub groups: Vec<GroupRow>,
    /// One message per legal group that had no scores.
    pub warnings: Vec<String>,
}

/// Per-group means of every metric, bounded metrics ×100.
pub fn aggregate(scores: &[Scored<'_>], dimension: Dimension) -> Aggregation {
    let mut sums: BTreeMap<GroupKey, (usize, [f64; 7])> = BTreeMap::new();
    for s in scores {
        let Some(key) = dimension.key(s.item) else { continue };
        let entry = sums.entry(key).or_insert((0, [0.0; 7]));
        entry.0 += 1;
        for m in Metric::ALL {
            entry.1[m as usize] += m.reported(s.record);
        }
    }
    let mut groups = Vec::new();
    let mut warnings = Vec::new();
    for key in dimension.legal_keys() {
        match sums.remove(&key) {
            Some((n, total)) => groups.push(GroupRow {
                key,
                n,
                means: total.iter().map(|v| v / n as f64).collect(),
            }),
            None => warnings.push(format!(
                "{} group {} has no scores; omitted",
                dimension.as_str(),
                key.label()
            )),
        }
    }
    Aggregation { dimension, groups, warnings }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub base: Condition,
    pub other: Condition,
    pub metric: Metric,
    pub test: TestResult,
    /// Base-condition items with no partner under `other` (or duplicates).
    pub unpaired_base: usize,
    /// `other`-condition items with no base partner (or duplicates).
    pub unpaired_other: usize,
}

/// Paired test of `other` against `base`, pairing items on
/// `(base_table_id, chart_type)`. Direction accounts for metrics where
/// lower is better.
pub fn compare_conditions(
    scores: &[Scored<'_>],
    base: Condition,
    other: Condition,
    metric: Metric,
) -> Result<Comparison> {
    let mut base_by_key: BTreeMap<(&str, ChartType), f64> = BTreeMap::new();
    let mut other_by_key: BTreeMap<(&str, ChartType), f64> = BTreeMap::new();
    let (mut dup_base, mut dup_other) = (0, 0);
    for s in scores {
        let key = (s.item.base_table_id.as_str(), s.item.chart_type);
        let v = metric.value(s.record);
        if s.item.condition == base {
            if base_by_key.insert(key, v).is_some() {
                dup_base += 1;
            }
        } else if s.item.condition == other && other_by_key.insert(key, v).is_some() {
            dup_other += 1;
        }
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (k, v) in &base_by_key {
        if let Some(w) = other_by_key.get(k) {
            x.push(*v);
            y.push(*w);
        }
    }
    let paired = x.len();
    let mut test = wilcoxon_signed_rank(&x, &y)?;
    if metric.lower_is_better() {
        test.direction = test.direction.flipped();
    }
    Ok(Comparison {
        base,
        other,
        metric,
        test,
        unpaired_base: base_by_key.len() - paired + dup_base,
        unpaired_other: other_by_key.len() - paired + dup_other,
    })
}
