//! Scoring stored predictions against the manifest's ground truth.

use anyhow::{anyhow, Result};
use chartbench_core::generate::{Manifest, SCHEMA_VERSION};
use chartbench_core::metrics::score;
use chartbench_core::parse::{parse_prediction, Dialect};
use chartbench_core::DataTable;
use rayon::prelude::*;

use crate::io::{index_items, PredictionRecord, ScoreRow};

#[derive(Debug, Default)]
pub struct ScoreOutcome {
    pub rows: Vec<ScoreRow>,
    /// Failed-call records that carry no output and were not scored.
    pub skipped_failed_calls: usize,
    pub warnings: Vec<String>,
}

impl ScoreOutcome {
    pub fn parse_failures(&self) -> usize {
        self.rows.iter().filter(|r| r.parse_failed).count()
    }
}

/// Scores every successful prediction. Output that cannot be read as a
/// table is scored as an empty table and flagged. A prediction whose item
/// or ground truth is missing from the manifest is a hard error.
pub fn score_predictions(manifest: &Manifest, predictions: &[PredictionRecord]) -> Result<ScoreOutcome> {
    let items = index_items(manifest);
    let usable: Vec<&PredictionRecord> = predictions.iter().filter(|p| p.succeeded()).collect();
    let rows: Vec<ScoreRow> = usable
        .par_iter()
        .map(|p| {
            let item = items
                .get(p.item_id.as_str())
                .ok_or_else(|| anyhow!("prediction for unknown item {}", p.item_id))?;
            let truth = manifest
                .truth_for(item)
                .ok_or_else(|| anyhow!("no ground truth table {} for item {}", item.table_id, item.id))?;
            let (parsed, diag) = parse_prediction(&p.raw_text);
            let parse_failed = diag.dialect_detected == Dialect::Failed;
            let pred = if parse_failed { DataTable::empty(&p.item_id) } else { parsed };
            let record = score(truth, &pred, &item.axis)?;
            Ok(ScoreRow {
                schema_version: SCHEMA_VERSION,
                item_id: p.item_id.clone(),
                model: p.model.clone(),
                prompt_variant: p.prompt_variant,
                parse_failed,
                dialect: diag.dialect_detected,
                unparsed_cells: diag.unparsed_cells,
                record,
            })
        })
        .collect::<Result<_>>()?;
    let mut warnings = Vec::new();
    if predictions.is_empty() {
        warnings.push("no predictions to score".to_string());
    }
    let outcome = ScoreOutcome {
        skipped_failed_calls: predictions.len() - usable.len(),
        rows,
        warnings,
    };
    if outcome.parse_failures() > 0 {
        let mut w = outcome.warnings.clone();
        w.push(format!("{} predictions could not be parsed and were scored as empty", outcome.parse_failures()));
        return Ok(ScoreOutcome { warnings: w, ..outcome });
    }
    Ok(outcome)
}
