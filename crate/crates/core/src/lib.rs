//! Allocation-only core of the chart-to-table benchmark toolkit.
//!
//! Everything in this crate is a pure function over in-memory values:
//!
//! - [`table`]: data tables, y-axis descriptions, benchmark items and the
//!   digit-length classifier used to stratify the benchmark.
//! - [`generate`]: deterministic generation of the four benchmark parts.
//! - [`numformat`]: tick-label formatting (plain, comma, scientific,
//!   abbreviated) and tolerant number parsing.
//! - [`parse`]: model-output text to [`DataTable`].
//! - [`assignment`]: rectangular minimal-cost assignment.
//! - [`metrics`]: tick-based error distances and the F1 metric family.
//! - [`stats`]: imbalance, correlation, crossing counts, Wilcoxon tests and
//!   grouped aggregation.
//! - [`prompt`]: prompt construction for model queries.
//!
//! IO, rendering, HTTP and the CLI live in the `chartbench` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod assignment;
mod decimal;
mod error;
pub mod generate;
pub mod metrics;
pub mod numformat;
pub mod parse;
pub mod prompt;
pub mod stats;
pub mod table;

pub use decimal::Decimal;
pub use error::{Error, Result};
pub use table::{
    digit_length, AxisSpec, BenchmarkItem, Cell, ChartType, Condition, DataTable, Part,
    Violation,
};
