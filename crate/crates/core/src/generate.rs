//! Deterministic benchmark generation.
//!
//! Base tables hold single-digit values and are scaled by powers of ten to
//! every target digit length (Part A). The three-entity tables then seed the
//! tick-count (B), range (C) and label-format (D) variants. All arithmetic on
//! generated values goes through [`Decimal`] so a value like `7.31e15` is the
//! double nearest to that decimal rather than `7.31 * 1e15`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numformat::TickFormat;
use crate::table::{approx_eq, digit_length, AxisSpec, BenchmarkItem, ChartType, Condition, DataTable, Part};
use crate::{Decimal, Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Nice axis maxima are `m * 10^k` with `m` from this list (scaled by 10).
const NICE_MANTISSAS_X10: [i128; 4] = [10, 20, 25, 50];

pub const MAX_DIGIT_LENGTH: u8 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub seed: u64,
    pub tables_per_entity_count: usize,
    pub entity_counts: Vec<usize>,
    pub digit_lengths: Vec<u8>,
    pub x_category_count: usize,
    pub x_category_labels: Vec<String>,
    /// Legend names, one per entity column.
    pub entity_labels: Vec<String>,
    pub parts: Vec<Part>,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 20_251_016,
            tables_per_entity_count: 10,
            entity_counts: (1..=6).collect(),
            digit_lengths: (0..=MAX_DIGIT_LENGTH).collect(),
            x_category_count: 4,
            x_category_labels: ["2018", "2019", "2020", "2021"].map(String::from).to_vec(),
            entity_labels: ["Alpha", "Bravo", "Charlie", "Delta", "Echo", "Foxtrot"]
                .map(String::from)
                .to_vec(),
            parts: Part::ALL.to_vec(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.tables_per_entity_count == 0 {
            return fail("tables_per_entity_count must be positive".into());
        }
        if self.entity_counts.is_empty() || self.digit_lengths.is_empty() || self.parts.is_empty() {
            return fail("entity_counts, digit_lengths and parts must be non-empty".into());
        }
        if let Some(e) = self.entity_counts.iter().find(|e| !(1..=6).contains(*e)) {
            return fail(format!("entity count {e} outside 1..=6"));
        }
        if let Some(d) = self.digit_lengths.iter().find(|d| **d > MAX_DIGIT_LENGTH) {
            return fail(format!("digit length {d} outside 0..=16"));
        }
        if has_duplicates(&self.entity_counts) || has_duplicates(&self.digit_lengths) {
            return fail("entity_counts and digit_lengths must not repeat".into());
        }
        if self.x_category_count == 0 || self.x_category_labels.len() != self.x_category_count {
            return fail(format!(
                "x_category_count is {} but {} labels were given",
                self.x_category_count,
                self.x_category_labels.len()
            ));
        }
        let max_entities = self.entity_counts.iter().copied().max().unwrap_or(0);
        if self.entity_labels.len() < max_entities {
            return fail(format!("need {max_entities} entity labels, got {}", self.entity_labels.len()));
        }
        if self.parts.iter().any(|p| *p != Part::A) && !self.entity_counts.contains(&3) {
            return fail("parts B-D are derived from three-entity tables; entity_counts must include 3".into());
        }
        Ok(())
    }

    /// Number of scaled Part-A tables this config produces.
    pub fn table_count(&self) -> usize {
        self.tables_per_entity_count * self.entity_counts.len() * self.digit_lengths.len()
    }
}

fn has_duplicates<T: Ord>(xs: &[T]) -> bool {
    let mut seen = alloc::collections::BTreeSet::new();
    !xs.iter().all(|x| seen.insert(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub toolkit_version: String,
    pub config: GenConfig,
    pub items: Vec<BenchmarkItem>,
    pub ground_truth: BTreeMap<String, DataTable>,
}

impl Manifest {
    pub fn truth_for(&self, item: &BenchmarkItem) -> Option<&DataTable> {
        self.ground_truth.get(&item.table_id)
    }

    pub fn item(&self, id: &str) -> Option<&BenchmarkItem> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn count_part(&self, part: Part) -> usize {
        self.items.iter().filter(|i| i.part == part).count()
    }

    /// Ids of the scaled Part-A tables.
    pub fn base_table_ids(&self) -> impl Iterator<Item = &str> {
        self.ground_truth
            .keys()
            .map(String::as_str)
            .filter(|id| !id.ends_with("-pos") && !id.ends_with("-neg"))
    }
}

/// Single-digit base tables, `tables_per_entity_count` for each entity count,
/// in config order. Values are uniform over the cent grid of `[1, 10)`.
pub fn generate_base_tables(config: &GenConfig) -> Result<Vec<DataTable>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut tables = Vec::with_capacity(config.tables_per_entity_count * config.entity_counts.len());
    for &entities in &config.entity_counts {
        for index in 0..config.tables_per_entity_count {
            let values = (0..config.x_category_count)
                .map(|_| {
                    (0..entities)
                        .map(|_| Decimal::new(rng.random_range(100..1000), -2).to_f64())
                        .collect()
                })
                .collect();
            tables.push(DataTable::from_values(
                format!("e{entities}-t{index:02}"),
                config.x_category_labels.clone(),
                config.entity_labels[..entities].to_vec(),
                values,
            ));
        }
    }
    Ok(tables)
}

/// Scales a single-digit table to `target_dl` by a decimal exponent shift.
pub fn scale_table(table: &DataTable, target_dl: u8) -> Result<DataTable> {
    if target_dl > MAX_DIGIT_LENGTH {
        return Err(Error::DigitLengthOutOfRange(target_dl));
    }
    for v in table.values() {
        if digit_length(v)? != 1 {
            return Err(Error::NotSingleDigit { value: v });
        }
    }
    let shift = i32::from(target_dl) - 1;
    let mut failure = None;
    let mut scaled = table.map_values(|v| match Decimal::from_f64(v) {
        Ok(d) => d.shift(shift).to_f64(),
        Err(e) => {
            failure = Some(e);
            v
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    scaled.id = format!("{}-d{:02}", table.id, target_dl);
    Ok(scaled)
}

/// Smallest `m * 10^k >= max` with `m` in {1, 2, 2.5, 5}.
fn nice_maximum(max: Decimal) -> Decimal {
    let k = max.magnitude().unwrap_or(0);
    // Candidates ascend in value, so the first hit is the smallest.
    for exp in [k, k + 1] {
        for m in NICE_MANTISSAS_X10 {
            let candidate = Decimal::new(m, exp - 1);
            if candidate >= max {
                return candidate;
            }
        }
    }
    Decimal::new(1, k + 2)
}

fn check_tick_count(n: usize) -> Result<()> {
    if matches!(n, 3 | 6 | 11) {
        Ok(())
    } else {
        Err(Error::TickCount(n))
    }
}

/// `n` equally spaced ticks from `min` to `max`, computed in decimal.
fn spaced_ticks(min: Decimal, max: Decimal, n: usize, format: TickFormat) -> Result<AxisSpec> {
    let span = max.plus(min.negated());
    let interval = span.div_int(n as i128 - 1).ok_or(Error::DegenerateAxis)?;
    let ticks = (0..n)
        .map(|i| min.plus(interval.mul_int(i as i128)).to_f64())
        .collect();
    let mut axis = AxisSpec::from_ticks(ticks, format)?;
    // Keep the interval exact rather than a difference of rounded ticks.
    axis.major_interval = interval.to_f64();
    axis.minor_estimate_t = axis.major_interval / 5.0;
    Ok(axis)
}

fn decimal_max(table: &DataTable) -> Result<Decimal> {
    let max = table.max_value().ok_or(Error::DegenerateAxis)?;
    if max <= 0.0 {
        return Err(Error::DegenerateAxis);
    }
    Decimal::from_f64(max)
}

/// Y-axis from 0 to the nice maximum covering the table, with `n_major_ticks`
/// ticks in plain format.
pub fn derive_axis(table: &DataTable, n_major_ticks: usize) -> Result<AxisSpec> {
    check_tick_count(n_major_ticks)?;
    let max = nice_maximum(decimal_max(table)?);
    spaced_ticks(Decimal::ZERO, max, n_major_ticks, TickFormat::Plain)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeVariant {
    Pos,
    Neg,
    Ext,
}

impl RangeVariant {
    pub fn condition(self) -> Condition {
        match self {
            RangeVariant::Pos => Condition::Pos,
            RangeVariant::Neg => Condition::Neg,
            RangeVariant::Ext => Condition::Ext,
        }
    }
}

/// Part-C range transformation of a base table and its 6-tick axis.
///
/// `Pos`/`Neg` move cells and ticks by three major intervals; `Ext` keeps
/// the cells and doubles the maximum tick.
pub fn shift_range(table: &DataTable, axis: &AxisSpec, variant: RangeVariant) -> Result<(DataTable, AxisSpec)> {
    let base_axis = derive_axis(table, 6).map_err(|_| Error::AlreadyShifted)?;
    if base_axis.tick_values != axis.tick_values {
        return Err(Error::AlreadyShifted);
    }
    let max = nice_maximum(decimal_max(table)?);
    let interval = max.div_int(5).ok_or(Error::DegenerateAxis)?;
    match variant {
        RangeVariant::Ext => {
            let axis = spaced_ticks(Decimal::ZERO, max.mul_int(2), 6, axis.format)?;
            Ok((table.clone(), axis))
        }
        RangeVariant::Pos | RangeVariant::Neg => {
            let mut offset = interval.mul_int(3);
            if variant == RangeVariant::Neg {
                offset = offset.negated();
            }
            let mut failure = None;
            let mut shifted = table.map_values(|v| match Decimal::from_f64(v) {
                Ok(d) => d.plus(offset).to_f64(),
                Err(e) => {
                    failure = Some(e);
                    v
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
            let suffix = if variant == RangeVariant::Pos { "pos" } else { "neg" };
            shifted.id = format!("{}-{suffix}", table.id);
            let axis = spaced_ticks(offset, max.plus(offset), 6, axis.format)?;
            Ok((shifted, axis))
        }
    }
}

fn item(
    table: &DataTable,
    base_table_id: &str,
    digit_length: u8,
    condition: Condition,
    chart_type: ChartType,
    axis: AxisSpec,
) -> BenchmarkItem {
    BenchmarkItem {
        id: format!("{}-{}-{}", base_table_id, condition.as_str(), chart_type.as_str()),
        table_id: table.id.clone(),
        base_table_id: base_table_id.to_string(),
        chart_type,
        part: condition.part(),
        digit_length,
        entity_count: table.n_cols() as u8,
        condition,
        axis,
        image_ref: None,
    }
}

/// Full benchmark manifest for `config`. Items are ordered by part, then by
/// table, condition and chart type.
pub fn generate_manifest(config: &GenConfig) -> Result<Manifest> {
    let base = generate_base_tables(config)?;
    let mut scaled = Vec::with_capacity(config.table_count());
    for table in &base {
        for &dl in &config.digit_lengths {
            scaled.push((dl, scale_table(table, dl)?));
        }
    }

    let mut items = Vec::new();
    let mut ground_truth = BTreeMap::new();
    let wants = |p: Part| config.parts.contains(&p);

    for (dl, table) in &scaled {
        let base_axis = derive_axis(table, 6)?;
        if wants(Part::A) {
            for chart in ChartType::ALL {
                items.push(item(table, &table.id, *dl, Condition::Base, chart, base_axis.clone()));
            }
        }
        ground_truth.insert(table.id.clone(), table.clone());
    }

    let three_entity: Vec<&(u8, DataTable)> = scaled.iter().filter(|(_, t)| t.n_cols() == 3).collect();

    if wants(Part::B) {
        for (dl, table) in &three_entity {
            for (condition, n) in [(Condition::Ticks3, 3), (Condition::Ticks11, 11)] {
                let axis = derive_axis(table, n)?;
                for chart in ChartType::ALL {
                    items.push(item(table, &table.id, *dl, condition, chart, axis.clone()));
                }
            }
        }
    }

    if wants(Part::C) {
        for (dl, table) in &three_entity {
            let base_axis = derive_axis(table, 6)?;
            for variant in [RangeVariant::Pos, RangeVariant::Neg, RangeVariant::Ext] {
                let (shifted, axis) = shift_range(table, &base_axis, variant)?;
                for chart in ChartType::ALL {
                    items.push(item(&shifted, &table.id, *dl, variant.condition(), chart, axis.clone()));
                }
                if shifted.id != table.id {
                    ground_truth.insert(shifted.id.clone(), shifted);
                }
            }
        }
    }

    if wants(Part::D) {
        for (dl, table) in &three_entity {
            let base_axis = derive_axis(table, 6)?;
            for (condition, format) in [
                (Condition::Comma, TickFormat::Comma),
                (Condition::Sci, TickFormat::Scientific),
                (Condition::Abbr, TickFormat::Abbrev),
            ] {
                let axis = AxisSpec {
                    format,
                    ..base_axis.clone()
                };
                for chart in ChartType::ALL {
                    items.push(item(table, &table.id, *dl, condition, chart, axis.clone()));
                }
            }
        }
    }

    Ok(Manifest {
        schema_version: SCHEMA_VERSION,
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        items,
        ground_truth,
    })
}

/// Checks that every cell of every item lies inside its axis range and that
/// the axis itself is well formed. Returns the ids of offending items.
pub fn items_outside_axis(manifest: &Manifest) -> Vec<String> {
    manifest
        .items
        .iter()
        .filter(|item| {
            let Some(table) = manifest.truth_for(item) else {
                return true;
            };
            let axis = &item.axis;
            !table.values().all(|v| axis.contains(v))
                || !approx_eq(axis.minor_estimate_t * 5.0, axis.major_interval, 1e-12)
                || axis.tick_values.len() != axis.n_major_ticks
        })
        .map(|item| item.id.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn table_with(values: Vec<Vec<f64>>) -> DataTable {
        let rows = (0..values.len()).map(|i| format!("r{i}")).collect();
        let cols = (0..values[0].len()).map(|i| format!("c{i}")).collect();
        DataTable::from_values("t", rows, cols, values)
    }

    #[test]
    fn default_config_counts() {
        let c = GenConfig::default();
        assert_eq!(c.table_count(), 1020);
        c.validate().unwrap();
    }

    #[test]
    fn base_tables_single_digit() {
        let tables = generate_base_tables(&GenConfig::default()).unwrap();
        assert_eq!(tables.len(), 60);
        for t in &tables {
            assert!(t.values().all(|v| (1.0..10.0).contains(&v)));
            assert_eq!(t.n_rows(), 4);
        }
        for e in 1..=6 {
            assert_eq!(tables.iter().filter(|t| t.n_cols() == e).count(), 10);
        }
    }

    #[test]
    fn base_tables_for_one_entity_count() {
        let config = GenConfig {
            entity_counts: vec![3],
            ..GenConfig::default()
        };
        let tables = generate_base_tables(&config).unwrap();
        assert_eq!(tables.len(), 10);
        assert!(tables.iter().all(|t| t.n_cols() == 3));
    }

    #[test]
    fn base_tables_deterministic() {
        let c = GenConfig::default();
        assert_eq!(generate_base_tables(&c).unwrap(), generate_base_tables(&c).unwrap());
        let other = GenConfig { seed: 7, ..c.clone() };
        assert_ne!(generate_base_tables(&c).unwrap(), generate_base_tables(&other).unwrap());
    }

    #[test]
    fn scale_examples() {
        let t = table_with(vec![vec![7.3]]);
        assert_eq!(scale_table(&t, 4).unwrap().get(0, 0), Some(7300.0));
        assert_eq!(scale_table(&t, 0).unwrap().get(0, 0), Some(0.73));
        assert_eq!(scale_table(&t, 1).unwrap().get(0, 0), Some(7.3));
        assert_eq!(scale_table(&t, 16).unwrap().get(0, 0), Some(7.3e15));
        assert_eq!(scale_table(&t, 4).unwrap().id, "t-d04");
        assert_eq!(scale_table(&t, 4).unwrap().col_headers, t.col_headers);
    }

    #[test]
    fn scale_rejects_non_single_digit() {
        let t = table_with(vec![vec![7.3, 12.0]]);
        assert_eq!(scale_table(&t, 2), Err(Error::NotSingleDigit { value: 12.0 }));
        assert!(scale_table(&table_with(vec![vec![7.3]]), 17).is_err());
    }

    #[test]
    fn nice_maximum_enumeration() {
        let nice = |x: f64| nice_maximum(Decimal::from_f64(x).unwrap()).to_f64();
        assert_eq!(nice(9.1), 10.0);
        assert_eq!(nice(10.0), 10.0);
        assert_eq!(nice(1.0), 1.0);
        assert_eq!(nice(1.01), 2.0);
        assert_eq!(nice(2.2), 2.5);
        assert_eq!(nice(2.5), 2.5);
        assert_eq!(nice(4.99), 5.0);
        assert_eq!(nice(5.01), 10.0);
        assert_eq!(nice(0.73), 1.0);
        assert_eq!(nice(0.13), 0.2);
        assert_eq!(nice(7.31e15), 1e16);
    }

    #[test]
    fn derive_axis_examples() {
        let t = table_with(vec![vec![9.1, 3.0], vec![1.0, 2.0]]);
        let six = derive_axis(&t, 6).unwrap();
        assert_eq!(six.tick_values, vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(six.minor_estimate_t, 0.4);
        let three = derive_axis(&t, 3).unwrap();
        assert_eq!(three.tick_values, vec![0.0, 5.0, 10.0]);
        assert_eq!(three.minor_estimate_t, 1.0);
        let eleven = derive_axis(&t, 11).unwrap();
        assert_eq!(eleven.tick_values.len(), 11);
        assert_eq!(eleven.major_interval, 1.0);
        let boundary = derive_axis(&table_with(vec![vec![10.0]]), 6).unwrap();
        assert_eq!(boundary.max_tick(), 10.0);
    }

    #[test]
    fn derive_axis_errors() {
        assert_eq!(derive_axis(&table_with(vec![vec![0.0, 0.0]]), 6), Err(Error::DegenerateAxis));
        assert_eq!(derive_axis(&table_with(vec![vec![1.0]]), 5), Err(Error::TickCount(5)));
    }

    #[test]
    fn derive_axis_ticks_are_exact_decimals() {
        let t = table_with(vec![vec![2.2]]);
        let eleven = derive_axis(&t, 11).unwrap();
        assert_eq!(eleven.tick_values[7], 1.75);
        let tiny = derive_axis(&table_with(vec![vec![0.22]]), 11).unwrap();
        assert_eq!(tiny.tick_values[3], 0.075);
        assert_eq!(tiny.major_interval, 0.025);
    }

    #[test]
    fn shift_range_examples() {
        let t = table_with(vec![vec![9.1, 3.0], vec![1.0, 2.0]]);
        let axis = derive_axis(&t, 6).unwrap();

        let (pos, pos_axis) = shift_range(&t, &axis, RangeVariant::Pos).unwrap();
        assert_eq!(pos.get(0, 0), Some(15.1));
        assert_eq!(pos.get(1, 0), Some(7.0));
        assert_eq!(pos_axis.min_tick(), 6.0);
        assert_eq!(pos_axis.max_tick(), 16.0);
        assert_eq!(pos_axis.major_interval, 2.0);

        let (neg, neg_axis) = shift_range(&t, &axis, RangeVariant::Neg).unwrap();
        assert_eq!(neg.get(0, 0), Some(3.1));
        assert_eq!(neg.get(1, 1), Some(-4.0));
        assert_eq!(neg_axis.min_tick(), -6.0);

        let (ext, ext_axis) = shift_range(&t, &axis, RangeVariant::Ext).unwrap();
        assert_eq!(ext, t);
        assert_eq!(ext_axis.max_tick(), 20.0);
        assert_eq!(ext_axis.minor_estimate_t, 0.8);
        assert_eq!(ext_axis.tick_values, vec![0.0, 4.0, 8.0, 12.0, 16.0, 20.0]);
    }

    #[test]
    fn shift_range_rejects_transformed_inputs() {
        let t = table_with(vec![vec![9.1, 3.0]]);
        let axis = derive_axis(&t, 6).unwrap();
        let (pos, pos_axis) = shift_range(&t, &axis, RangeVariant::Pos).unwrap();
        assert_eq!(shift_range(&pos, &pos_axis, RangeVariant::Neg), Err(Error::AlreadyShifted));
        let (_, ext_axis) = shift_range(&t, &axis, RangeVariant::Ext).unwrap();
        assert_eq!(shift_range(&t, &ext_axis, RangeVariant::Ext), Err(Error::AlreadyShifted));
        let three = derive_axis(&t, 3).unwrap();
        assert_eq!(shift_range(&t, &three, RangeVariant::Pos), Err(Error::AlreadyShifted));
    }

    #[test]
    fn shift_preserves_differences() {
        let t = table_with(vec![vec![9.1, 3.07], vec![1.55, 2.0]]);
        let axis = derive_axis(&t, 6).unwrap();
        for variant in [RangeVariant::Pos, RangeVariant::Neg] {
            let (s, _) = shift_range(&t, &axis, variant).unwrap();
            let a: Vec<f64> = t.values().collect();
            let b: Vec<f64> = s.values().collect();
            for i in 0..a.len() {
                for j in 0..a.len() {
                    assert!(libm::fabs((a[i] - a[j]) - (b[i] - b[j])) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn part_a_only_manifest() {
        let config = GenConfig {
            parts: vec![Part::A],
            ..GenConfig::default()
        };
        let m = generate_manifest(&config).unwrap();
        assert_eq!(m.items.len(), 3060);
        assert_eq!(m.ground_truth.len(), 1020);
    }

    #[test]
    fn config_errors() {
        let bad = [
            GenConfig { tables_per_entity_count: 0, ..GenConfig::default() },
            GenConfig { entity_counts: vec![7], ..GenConfig::default() },
            GenConfig { digit_lengths: vec![17], ..GenConfig::default() },
            GenConfig { digit_lengths: vec![1, 1], ..GenConfig::default() },
            GenConfig { x_category_count: 5, ..GenConfig::default() },
            GenConfig { entity_counts: vec![1, 2], ..GenConfig::default() },
            GenConfig { parts: vec![], ..GenConfig::default() },
        ];
        for c in bad {
            assert!(matches!(generate_manifest(&c), Err(Error::Config(_))), "{c:?}");
        }
        let ok = GenConfig {
            entity_counts: vec![1, 2],
            parts: vec![Part::A],
            ..GenConfig::default()
        };
        assert!(generate_manifest(&ok).is_ok());
    }
}
