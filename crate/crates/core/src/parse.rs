//! Model-output text to [`DataTable`].
//!
//! Recognized dialects:
//!
//! - linearized: rows split by newlines or the literal `<0x0A>` token, cells
//!   by `|`, e.g. `Year | A | B <0x0A> 2018 | 1 | 2`;
//! - markdown pipe tables, with the `|---|` rule line dropped;
//! - delimiter-free: tab or multi-space separated columns.
//!
//! The first row holds the column headers (after an optional corner label),
//! the first cell of each later row is the row header. Surrounding prose and
//! code fences are ignored. When several tables are present the one with the
//! most cells wins.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::numformat::{format_tick, parse_number, TickFormat};
use crate::table::DataTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dialect {
    Linearized,
    Markdown,
    DelimiterFree,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub dialect_detected: Dialect,
    /// Non-empty lines outside the chosen table.
    pub dropped_lines: usize,
    /// Cells that were missing or not numeric; they become absent cells.
    pub unparsed_cells: usize,
    pub orientation_transposed: bool,
}

impl ParseDiagnostics {
    pub fn failed(dropped_lines: usize) -> Self {
        Self {
            dialect_detected: Dialect::Failed,
            dropped_lines,
            unparsed_cells: 0,
            orientation_transposed: false,
        }
    }

    pub fn is_clean(&self) -> bool {
        self.dialect_detected != Dialect::Failed
            && self.dropped_lines == 0
            && self.unparsed_cells == 0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Swap rows and columns after parsing.
    pub transpose: bool,
}

/// Corner label written by [`write_linearized`].
pub const CORNER_LABEL: &str = "Category";

/// Parses with default options.
pub fn parse_prediction(text: &str) -> (DataTable, ParseDiagnostics) {
    parse_prediction_with(text, ParseOptions::default())
}

pub fn parse_prediction_with(text: &str, options: ParseOptions) -> (DataTable, ParseDiagnostics) {
    let normalized = text.replace("<0x0A>", "\n").replace("\r\n", "\n");
    let lines: Vec<&str> = normalized
        .lines()
        .map(str::trim)
        .collect();
    let content_lines = lines.iter().filter(|l| !is_noise(l)).count();

    let mut candidates: Vec<Candidate> = blocks(&lines, |l| l.contains('|'))
        .into_iter()
        .filter_map(|b| pipe_candidate(&b))
        .collect();
    if candidates.is_empty() {
        candidates = blocks(&lines, |l| split_free(l).len() >= 2)
            .into_iter()
            .filter_map(|b| free_candidate(&b))
            .collect();
    }

    // Largest by cell count; earliest on ties.
    let mut best: Option<Candidate> = None;
    for c in candidates {
        if best.as_ref().is_none_or(|b| c.cell_count() > b.cell_count()) {
            best = Some(c);
        }
    }
    let Some(best) = best else {
        return (DataTable::empty(""), ParseDiagnostics::failed(content_lines));
    };

    let (mut table, unparsed_cells) = best.build();
    if options.transpose {
        table = table.transposed();
    }
    let diagnostics = ParseDiagnostics {
        dialect_detected: best.dialect,
        dropped_lines: content_lines.saturating_sub(best.source_lines),
        unparsed_cells,
        orientation_transposed: options.transpose,
    };
    (table, diagnostics)
}

/// Header form used for matching: lowercase, trimmed of whitespace and
/// markup punctuation at both ends, internal whitespace collapsed.
pub fn canonicalize_header(s: &str) -> String {
    const EDGE: &[char] = &['*', '_', '`', '"', '\'', ':', ';', ',', '.', '#', '~'];
    let collapsed = s.split_whitespace().collect::<Vec<_>>().join(" ");
    let trimmed = collapsed.trim_matches(|c: char| c.is_whitespace() || EDGE.contains(&c));
    trimmed.to_lowercase()
}

/// Linearized serialization understood by [`parse_prediction`]. Absent cells
/// are written empty.
pub fn write_linearized(table: &DataTable) -> String {
    let mut out = String::from(CORNER_LABEL);
    for h in &table.col_headers {
        out.push_str(" | ");
        out.push_str(h);
    }
    for (r, header) in table.row_headers.iter().enumerate() {
        out.push('\n');
        out.push_str(header);
        for c in 0..table.n_cols() {
            out.push_str(" | ");
            if let Some(v) = table.get(r, c) {
                out.push_str(&format_tick(v, TickFormat::Plain));
            }
        }
    }
    out
}

fn is_noise(line: &str) -> bool {
    line.is_empty() || line.starts_with("```")
}

/// Maximal runs of consecutive lines satisfying `pred`; fences and blank
/// lines end a run.
fn blocks<'a>(lines: &[&'a str], pred: impl Fn(&str) -> bool) -> Vec<Vec<&'a str>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    for &line in lines {
        if !is_noise(line) && pred(line) {
            current.push(line);
        } else if !current.is_empty() {
            out.push(core::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

struct Candidate {
    dialect: Dialect,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    source_lines: usize,
}

impl Candidate {
    fn data_width(&self) -> usize {
        // Most common data-row width decides whether the header has a corner cell.
        let mut counts: Vec<(usize, usize)> = Vec::new();
        for r in &self.rows {
            match counts.iter_mut().find(|(w, _)| *w == r.len()) {
                Some((_, n)) => *n += 1,
                None => counts.push((r.len(), 1)),
            }
        }
        counts
            .iter()
            .max_by_key(|(w, n)| (*n, *w))
            .map_or(0, |(w, _)| *w)
    }

    fn col_headers(&self) -> &[String] {
        if self.header.len() + 1 == self.data_width() {
            &self.header
        } else {
            &self.header[1..]
        }
    }

    fn cell_count(&self) -> usize {
        self.rows.len() * self.col_headers().len()
    }

    fn build(&self) -> (DataTable, usize) {
        let cols = self.col_headers().to_vec();
        let mut unparsed = 0;
        let mut row_headers = Vec::with_capacity(self.rows.len());
        let mut cells = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            row_headers.push(row[0].clone());
            let values = (0..cols.len())
                .map(|c| {
                    let parsed = row.get(c + 1).and_then(|s| parse_number(s).ok());
                    if parsed.is_none() {
                        unparsed += 1;
                    }
                    parsed
                })
                .collect();
            cells.push(values);
        }
        let table = DataTable {
            id: String::new(),
            row_headers,
            col_headers: cols,
            cells,
        };
        (table, unparsed)
    }
}

fn is_rule(cells: &[String]) -> bool {
    !cells.is_empty()
        && cells.iter().all(|c| {
            let t = c.trim_matches(':');
            !t.is_empty() && t.chars().all(|ch| ch == '-')
        })
}

fn split_pipes(line: &str) -> Vec<String> {
    let mut inner = line;
    if let Some(rest) = inner.strip_prefix('|') {
        inner = rest;
    }
    if let Some(rest) = inner.strip_suffix('|') {
        inner = rest;
    }
    inner.split('|').map(|c| c.trim().to_string()).collect()
}

fn pipe_candidate(block: &[&str]) -> Option<Candidate> {
    let mut markdown = false;
    let mut rows: Vec<Vec<String>> = Vec::new();
    for line in block {
        let cells = split_pipes(line);
        if is_rule(&cells) {
            markdown = true;
            continue;
        }
        if line.starts_with('|') {
            markdown = true;
        }
        rows.push(cells);
    }
    // Chart-to-table models often lead with a "TITLE | ..." row.
    if rows.len() > 2 && rows[0].first().is_some_and(|c| c.eq_ignore_ascii_case("title")) {
        rows.remove(0);
    }
    let dialect = if markdown { Dialect::Markdown } else { Dialect::Linearized };
    candidate(dialect, rows, block.len())
}

fn split_free(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    for part in line.split('\t') {
        let mut rest = part;
        while let Some(pos) = rest.find("  ") {
            out.push(rest[..pos].trim().to_string());
            rest = rest[pos..].trim_start();
        }
        out.push(rest.trim().to_string());
    }
    out.retain(|c| !c.is_empty());
    out
}

fn free_candidate(block: &[&str]) -> Option<Candidate> {
    let rows: Vec<Vec<String>> = block.iter().map(|l| split_free(l)).collect();
    let numeric = rows
        .iter()
        .skip(1)
        .flat_map(|r| r.iter().skip(1))
        .any(|c| parse_number(c).is_ok());
    if !numeric {
        return None;
    }
    candidate(Dialect::DelimiterFree, rows, block.len())
}

fn candidate(dialect: Dialect, mut rows: Vec<Vec<String>>, source_lines: usize) -> Option<Candidate> {
    rows.retain(|r| r.iter().any(|c| !c.is_empty()));
    if rows.len() < 2 {
        return None;
    }
    let header = rows.remove(0);
    let c = Candidate {
        dialect,
        header,
        rows,
        source_lines,
    };
    if c.header.is_empty() || c.col_headers().is_empty() {
        return None;
    }
    Some(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn linearized_example() {
        let (t, d) = parse_prediction("Year | A | B\n2018 | 1 | 2\n2019 | 3 | 4");
        assert_eq!(t.col_headers, strings(&["A", "B"]));
        assert_eq!(t.row_headers, strings(&["2018", "2019"]));
        assert_eq!(t.cells, vec![vec![Some(1.0), Some(2.0)], vec![Some(3.0), Some(4.0)]]);
        assert_eq!(d.dialect_detected, Dialect::Linearized);
        assert!(d.is_clean());
    }

    #[test]
    fn markdown_example() {
        let (t, d) = parse_prediction("| Year | A |\n|---|---|\n| 2018 | 7,000 |");
        assert_eq!(t.col_headers, strings(&["A"]));
        assert_eq!(t.row_headers, strings(&["2018"]));
        assert_eq!(t.get(0, 0), Some(7000.0));
        assert_eq!(d.dialect_detected, Dialect::Markdown);
        assert_eq!(d.unparsed_cells, 0);
    }

    #[test]
    fn prose_fails() {
        let (t, d) = parse_prediction("I cannot read this chart.");
        assert_eq!(d.dialect_detected, Dialect::Failed);
        assert!(t.is_empty());
        assert_eq!(t.n_cols(), 0);
        assert_eq!(d.dropped_lines, 1);
    }

    #[test]
    fn deplot_style_token_and_title() {
        let text = "TITLE | Sales <0x0A> Year | Alpha | Bravo <0x0A> 2018 | 1.5 | 2 <0x0A> 2019 | 3e3 | 4K";
        let (t, d) = parse_prediction(text);
        assert_eq!(t.col_headers, strings(&["Alpha", "Bravo"]));
        assert_eq!(t.get(1, 0), Some(3000.0));
        assert_eq!(t.get(1, 1), Some(4000.0));
        assert_eq!(d.dialect_detected, Dialect::Linearized);
    }

    #[test]
    fn fenced_markdown_with_prose() {
        let text = "Here is the table:\n\n```markdown\n| Year | A | B |\n|:---|---:|---|\n| 2018 | 1 | n/a |\n```\nHope this helps!";
        let (t, d) = parse_prediction(text);
        assert_eq!(t.cells, vec![vec![Some(1.0), None]]);
        assert_eq!(d.dialect_detected, Dialect::Markdown);
        assert_eq!(d.unparsed_cells, 1);
        assert_eq!(d.dropped_lines, 2);
    }

    #[test]
    fn largest_table_wins() {
        let text = "| A | B |\n|---|---|\n| x | 1 |\n\nFull data:\n\n| Year | A | B |\n|---|---|---|\n| 2018 | 1 | 2 |\n| 2019 | 3 | 4 |";
        let (t, _) = parse_prediction(text);
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.col_headers, strings(&["A", "B"]));
    }

    #[test]
    fn header_without_corner_label() {
        let (t, _) = parse_prediction("A | B\n2018 | 1 | 2\n2019 | 3 | 4");
        assert_eq!(t.col_headers, strings(&["A", "B"]));
        assert_eq!(t.get(1, 1), Some(4.0));
    }

    #[test]
    fn ragged_rows_become_absent_cells() {
        let (t, d) = parse_prediction("Year | A | B\n2018 | 1\n2019 | 3 | 4");
        assert_eq!(t.cells[0], vec![Some(1.0), None]);
        assert_eq!(d.unparsed_cells, 1);
    }

    #[test]
    fn delimiter_free_tabs() {
        let (t, d) = parse_prediction("Year\tA\tB\n2018\t1\t2\n2019\t3\t4");
        assert_eq!(d.dialect_detected, Dialect::DelimiterFree);
        assert_eq!(t.get(0, 1), Some(2.0));
        let (t, _) = parse_prediction("Year    Alpha    Bravo\n2018    1.5    2,000");
        assert_eq!(t.col_headers, strings(&["Alpha", "Bravo"]));
        assert_eq!(t.get(0, 1), Some(2000.0));
    }

    #[test]
    fn transpose_on_request() {
        let opts = ParseOptions { transpose: true };
        let (t, d) = parse_prediction_with("Year | A | B\n2018 | 1 | 2", opts);
        assert!(d.orientation_transposed);
        assert_eq!(t.row_headers, strings(&["A", "B"]));
        assert_eq!(t.col_headers, strings(&["2018"]));
    }

    #[test]
    fn canonicalize_examples() {
        assert_eq!(canonicalize_header("  GDP (USD) "), "gdp (usd)");
        assert_eq!(canonicalize_header("Category_A"), "category_a");
        assert_eq!(canonicalize_header(""), "");
        assert_eq!(canonicalize_header("**Year**:"), "year");
        assert_eq!(canonicalize_header("North   \t America"), "north america");
    }

    #[test]
    fn writer_round_trip_with_absent_cell() {
        let mut t = DataTable::from_values(
            "",
            strings(&["2018", "2019"]),
            strings(&["Alpha", "Bravo"]),
            vec![vec![0.73, 7.3e15], vec![-6.0, 1234.5]],
        );
        let (back, d) = parse_prediction(&write_linearized(&t));
        assert_eq!(back, t);
        assert!(d.is_clean());
        t.cells[1][0] = None;
        let (back, d) = parse_prediction(&write_linearized(&t));
        assert_eq!(back, t);
        assert_eq!(d.unparsed_cells, 1);
    }
}
