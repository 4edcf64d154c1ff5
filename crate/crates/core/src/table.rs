//! Shared data model: tables, y-axis descriptions and benchmark items.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::numformat::TickFormat;
use crate::{Error, Result};

/// A table cell. `None` marks a predicted cell that could not be read.
pub type Cell = Option<f64>;

/// Number of digits in the integer part of `|x|`.
///
/// Zero for `|x| < 1`, otherwise `d` such that `10^(d-1) <= |x| < 10^d`.
pub fn digit_length(x: f64) -> Result<u32> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    let magnitude = libm::fabs(x);
    let mut digits = 0;
    let mut bound = 1.0;
    // Powers of ten are exact in f64 up to 1e22; beyond that the bound is
    // the nearest double, which still orders correctly against |x|.
    while magnitude >= bound {
        digits += 1;
        bound *= 10.0;
    }
    Ok(digits)
}

/// Ground-truth or predicted table. Rows are x-axis categories, columns are
/// entities (one per legend item).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataTable {
    pub id: String,
    pub row_headers: Vec<String>,
    pub col_headers: Vec<String>,
    /// Row-major grid, `row_headers.len()` rows of `col_headers.len()` cells.
    pub cells: Vec<Vec<Cell>>,
}

/// One flattened cell with its headers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Datapoint<'a> {
    pub row: &'a str,
    pub col: &'a str,
    pub value: Cell,
}

impl DataTable {
    /// Builds a fully populated table.
    pub fn from_values(
        id: impl Into<String>,
        row_headers: Vec<String>,
        col_headers: Vec<String>,
        values: Vec<Vec<f64>>,
    ) -> Self {
        let cells = values
            .into_iter()
            .map(|row| row.into_iter().map(Some).collect())
            .collect();
        Self {
            id: id.into(),
            row_headers,
            col_headers,
            cells,
        }
    }

    pub fn empty(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            row_headers: Vec::new(),
            col_headers: Vec::new(),
            cells: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.row_headers.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_headers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datapoints().next().is_none()
    }

    pub fn get(&self, row: usize, col: usize) -> Cell {
        self.cells.get(row).and_then(|r| r.get(col)).copied().flatten()
    }

    /// Cells in row-major order paired with their headers. Cells of a ragged
    /// grid without a matching header are skipped.
    pub fn datapoints(&self) -> impl Iterator<Item = Datapoint<'_>> + '_ {
        self.row_headers
            .iter()
            .zip(self.cells.iter())
            .flat_map(move |(row, cells)| {
                self.col_headers
                    .iter()
                    .zip(cells.iter())
                    .map(move |(col, value)| Datapoint {
                        row: row.as_str(),
                        col: col.as_str(),
                        value: *value,
                    })
            })
    }

    /// All present cell values in row-major order.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().flatten().filter_map(|c| *c)
    }

    pub fn max_value(&self) -> Option<f64> {
        self.values().reduce(f64::max)
    }

    pub fn min_value(&self) -> Option<f64> {
        self.values().reduce(f64::min)
    }

    /// Values of one entity (column) across x-categories; absent cells are `None`.
    pub fn column(&self, col: usize) -> Vec<Cell> {
        self.cells
            .iter()
            .map(|r| r.get(col).copied().flatten())
            .collect()
    }

    /// Applies `f` to every present cell, keeping headers and id.
    pub fn map_values(&self, mut f: impl FnMut(f64) -> f64) -> DataTable {
        DataTable {
            id: self.id.clone(),
            row_headers: self.row_headers.clone(),
            col_headers: self.col_headers.clone(),
            cells: self
                .cells
                .iter()
                .map(|r| r.iter().map(|c| c.map(&mut f)).collect())
                .collect(),
        }
    }

    /// Swaps rows and columns.
    pub fn transposed(&self) -> DataTable {
        let cells = (0..self.n_cols()).map(|c| self.column(c)).collect();
        DataTable {
            id: self.id.clone(),
            row_headers: self.col_headers.clone(),
            col_headers: self.row_headers.clone(),
            cells,
        }
    }
}

/// A broken [`DataTable`] invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// The number of cell rows differs from the number of row headers.
    RowCount { headers: usize, rows: usize },
    RaggedRow { row: usize, expected: usize, found: usize },
    DuplicateRowHeader(String),
    DuplicateColHeader(String),
    NonFinite { row: usize, col: usize },
    AbsentCell { row: usize, col: usize },
    EntityCount(usize),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowCount { headers, rows } => {
                write!(f, "{headers} row headers but {rows} cell rows")
            }
            Violation::RaggedRow { row, expected, found } => {
                write!(f, "ragged grid: row {row} has {found} cells, expected {expected}")
            }
            Violation::DuplicateRowHeader(h) => write!(f, "duplicate header: row {h:?}"),
            Violation::DuplicateColHeader(h) => write!(f, "duplicate header: column {h:?}"),
            Violation::NonFinite { row, col } => write!(f, "non-finite cell at ({row}, {col})"),
            Violation::AbsentCell { row, col } => write!(f, "absent cell at ({row}, {col})"),
            Violation::EntityCount(n) => write!(f, "entity count {n} outside 1..=6"),
        }
    }
}

/// Structural checks shared by predicted and ground-truth tables.
pub fn validate_table(table: &DataTable) -> Vec<Violation> {
    let mut out = Vec::new();
    if table.cells.len() != table.row_headers.len() {
        out.push(Violation::RowCount {
            headers: table.row_headers.len(),
            rows: table.cells.len(),
        });
    }
    let width = table.col_headers.len();
    for (r, row) in table.cells.iter().enumerate() {
        if row.len() != width {
            out.push(Violation::RaggedRow {
                row: r,
                expected: width,
                found: row.len(),
            });
        }
        for (c, cell) in row.iter().enumerate() {
            if matches!(cell, Some(v) if !v.is_finite()) {
                out.push(Violation::NonFinite { row: r, col: c });
            }
        }
    }
    for h in duplicates(&table.row_headers) {
        out.push(Violation::DuplicateRowHeader(h));
    }
    for h in duplicates(&table.col_headers) {
        out.push(Violation::DuplicateColHeader(h));
    }
    out
}

/// [`validate_table`] plus the stricter ground-truth invariants: every cell
/// present and between one and six entities.
pub fn validate_ground_truth(table: &DataTable) -> Vec<Violation> {
    let mut out = validate_table(table);
    if !(1..=6).contains(&table.n_cols()) {
        out.push(Violation::EntityCount(table.n_cols()));
    }
    for (r, row) in table.cells.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            if cell.is_none() {
                out.push(Violation::AbsentCell { row: r, col: c });
            }
        }
    }
    out
}

fn duplicates(headers: &[String]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut reported = BTreeSet::new();
    let mut out = Vec::new();
    for h in headers {
        if !seen.insert(h.as_str()) && reported.insert(h.as_str()) {
            out.push(h.clone());
        }
    }
    out
}

/// Description of a chart's y-axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    /// Major tick values, ascending and equally spaced.
    pub tick_values: Vec<f64>,
    pub major_interval: f64,
    /// Estimated minor tick interval `t`, one fifth of the major interval.
    pub minor_estimate_t: f64,
    pub format: TickFormat,
    pub n_major_ticks: usize,
}

impl AxisSpec {
    /// Builds an axis from its tick values. Fails if fewer than two ticks are
    /// given or the spacing is not uniform within 1e-9 relative.
    pub fn from_ticks(tick_values: Vec<f64>, format: TickFormat) -> Result<Self> {
        if tick_values.len() < 2 {
            return Err(Error::TickCount(tick_values.len()));
        }
        if let Some(bad) = tick_values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(*bad));
        }
        let major_interval = tick_values[1] - tick_values[0];
        if major_interval <= 0.0 {
            return Err(Error::DegenerateAxis);
        }
        let uniform = tick_values
            .windows(2)
            .all(|w| approx_eq(w[1] - w[0], major_interval, 1e-9));
        if !uniform {
            return Err(Error::DegenerateAxis);
        }
        Ok(Self {
            n_major_ticks: tick_values.len(),
            minor_estimate_t: major_interval / 5.0,
            major_interval,
            tick_values,
            format,
        })
    }

    pub fn min_tick(&self) -> f64 {
        self.tick_values[0]
    }

    pub fn max_tick(&self) -> f64 {
        self.tick_values[self.tick_values.len() - 1]
    }

    /// Whether `v` lies within the tick range, allowing 1e-9 relative slack.
    pub fn contains(&self, v: f64) -> bool {
        let slack = 1e-9 * libm::fmax(libm::fabs(self.min_tick()), libm::fabs(self.max_tick()));
        v >= self.min_tick() - slack && v <= self.max_tick() + slack
    }
}

pub(crate) fn approx_eq(a: f64, b: f64, rel: f64) -> bool {
    let scale = libm::fmax(libm::fabs(a), libm::fabs(b));
    libm::fabs(a - b) <= rel * scale || a == b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartType {
    Line,
    Dot,
    Bar,
}

impl ChartType {
    pub const ALL: [ChartType; 3] = [ChartType::Line, ChartType::Dot, ChartType::Bar];

    pub fn as_str(self) -> &'static str {
        match self {
            ChartType::Line => "line",
            ChartType::Dot => "dot",
            ChartType::Bar => "bar",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Part {
    A,
    B,
    C,
    D,
}

impl Part {
    pub const ALL: [Part; 4] = [Part::A, Part::B, Part::C, Part::D];

    pub fn as_str(self) -> &'static str {
        match self {
            Part::A => "A",
            Part::B => "B",
            Part::C => "C",
            Part::D => "D",
        }
    }
}

/// The y-axis condition an item was generated under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Base,
    Ticks3,
    Ticks11,
    Pos,
    Neg,
    Ext,
    Comma,
    Sci,
    Abbr,
}

impl Condition {
    pub const ALL: [Condition; 9] = [
        Condition::Base,
        Condition::Ticks3,
        Condition::Ticks11,
        Condition::Pos,
        Condition::Neg,
        Condition::Ext,
        Condition::Comma,
        Condition::Sci,
        Condition::Abbr,
    ];

    pub fn part(self) -> Part {
        match self {
            Condition::Base => Part::A,
            Condition::Ticks3 | Condition::Ticks11 => Part::B,
            Condition::Pos | Condition::Neg | Condition::Ext => Part::C,
            Condition::Comma | Condition::Sci | Condition::Abbr => Part::D,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Base => "base",
            Condition::Ticks3 => "ticks3",
            Condition::Ticks11 => "ticks11",
            Condition::Pos => "pos",
            Condition::Neg => "neg",
            Condition::Ext => "ext",
            Condition::Comma => "comma",
            Condition::Sci => "sci",
            Condition::Abbr => "abbr",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str().eq_ignore_ascii_case(s))
    }
}

/// One chart instance of the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkItem {
    pub id: String,
    /// Ground-truth table rendered by this item.
    pub table_id: String,
    /// The Part-A table this item was derived from; equals `table_id` for
    /// Part A. Paired comparisons join on this.
    pub base_table_id: String,
    pub chart_type: ChartType,
    pub part: Part,
    pub digit_length: u8,
    pub entity_count: u8,
    pub condition: Condition,
    pub axis: AxisSpec,
    #[serde(default)]
    pub image_ref: Option<String>,
}

impl BenchmarkItem {
    /// Checks the part/condition taxonomy.
    pub fn is_consistent(&self) -> bool {
        self.condition.part() == self.part
            && (self.part == Part::A || self.entity_count == 3)
            && self.digit_length <= 16
            && (1..=6).contains(&self.entity_count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn digit_length_examples() {
        assert_eq!(digit_length(0.5).unwrap(), 0);
        assert_eq!(digit_length(7000.0).unwrap(), 4);
        assert_eq!(digit_length(-250.0).unwrap(), 3);
        assert_eq!(digit_length(1.0).unwrap(), 1);
        assert_eq!(digit_length(0.0).unwrap(), 0);
        assert_eq!(digit_length(-0.999).unwrap(), 0);
        assert_eq!(digit_length(10.0).unwrap(), 2);
        assert_eq!(digit_length(9.999_999).unwrap(), 1);
        assert_eq!(digit_length(1e15).unwrap(), 16);
        assert_eq!(digit_length(9.99e15).unwrap(), 16);
    }

    #[test]
    fn digit_length_rejects_non_finite() {
        assert!(matches!(digit_length(f64::NAN), Err(Error::NonFinite(_))));
        assert!(digit_length(f64::INFINITY).is_err());
    }

    #[test]
    fn well_formed_table_validates() {
        let t = DataTable::from_values(
            "t",
            s(&["2018", "2019", "2020"]),
            s(&["A", "B", "C"]),
            vec![vec![1.0, 2.0, 3.0]; 3],
        );
        assert!(validate_table(&t).is_empty());
        assert!(validate_ground_truth(&t).is_empty());
    }

    #[test]
    fn ragged_row_reported_once() {
        let mut t = DataTable::from_values(
            "t",
            s(&["2018", "2019", "2020"]),
            s(&["A", "B", "C"]),
            vec![vec![1.0, 2.0, 3.0]; 3],
        );
        t.cells[1].pop();
        let v = validate_table(&t);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::RaggedRow { row: 1, expected: 3, found: 2 }));
        assert!(v[0].to_string().starts_with("ragged grid"));
    }

    #[test]
    fn duplicate_entity_reported_once() {
        let t = DataTable::from_values(
            "t",
            s(&["2018", "2019", "2020"]),
            s(&["A", "B", "A"]),
            vec![vec![1.0, 2.0, 3.0]; 3],
        );
        let v = validate_table(&t);
        assert_eq!(v, vec![Violation::DuplicateColHeader("A".to_string())]);
        assert!(v[0].to_string().starts_with("duplicate header"));
    }

    #[test]
    fn ground_truth_rejects_absent_cells_and_nan() {
        let mut t = DataTable::from_values("t", s(&["x"]), s(&["A", "B"]), vec![vec![1.0, 2.0]]);
        t.cells[0][0] = None;
        t.cells[0][1] = Some(f64::NAN);
        assert!(validate_table(&t).contains(&Violation::NonFinite { row: 0, col: 1 }));
        assert!(!validate_table(&t).contains(&Violation::AbsentCell { row: 0, col: 0 }));
        assert!(validate_ground_truth(&t).contains(&Violation::AbsentCell { row: 0, col: 0 }));
    }

    #[test]
    fn json_shape_uses_null_for_absent_cells() {
        let mut t = DataTable::from_values("t1", s(&["2018"]), s(&["A", "B"]), vec![vec![1.5, 2.0]]);
        t.cells[0][1] = None;
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(
            json,
            r#"{"id":"t1","row_headers":["2018"],"col_headers":["A","B"],"cells":[[1.5,null]]}"#
        );
        let back: DataTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn axis_from_ticks() {
        let a = AxisSpec::from_ticks(vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0], TickFormat::Plain).unwrap();
        assert_eq!(a.major_interval, 2.0);
        assert_eq!(a.minor_estimate_t, 0.4);
        assert_eq!(a.n_major_ticks, 6);
        assert!(AxisSpec::from_ticks(vec![0.0, 1.0, 3.0], TickFormat::Plain).is_err());
        assert!(AxisSpec::from_ticks(vec![1.0], TickFormat::Plain).is_err());
    }

    #[test]
    fn transposition_round_trips() {
        let t = DataTable::from_values(
            "t",
            s(&["r1", "r2"]),
            s(&["A", "B", "C"]),
            vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]],
        );
        let tt = t.transposed();
        assert_eq!(tt.n_rows(), 3);
        assert_eq!(tt.get(2, 1), Some(6.0));
        assert_eq!(tt.transposed(), t);
    }

    proptest! {
        #[test]
        fn digit_length_symmetric(x in -1e17f64..1e17) {
            prop_assume!(x != 0.0);
            let d = digit_length(x).unwrap();
            prop_assert_eq!(d, digit_length(-x).unwrap());
            prop_assert_eq!(d, digit_length(libm::fabs(x)).unwrap());
        }

        #[test]
        fn digit_length_monotone(a in 0f64..1e17, b in 0f64..1e17) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(digit_length(lo).unwrap() <= digit_length(hi).unwrap());
        }

        #[test]
        fn digit_length_scaling_law(cents in 100u32..1000, d in 0i32..=16) {
            // Decimal exponent shift, the way the generator scales.
            let scaled: f64 = alloc::format!("{}e{}", cents, d - 3).parse().unwrap();
            prop_assert_eq!(digit_length(scaled).unwrap(), d as u32);
        }
    }
}
