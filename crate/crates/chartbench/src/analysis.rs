//! Grouped means, paired condition tests and report files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Result};
use chartbench_core::generate::{Manifest, SCHEMA_VERSION};
use chartbench_core::prompt::PromptVariant;
use chartbench_core::stats::{
    aggregate, coefficient_of_variation, compare_conditions, crossing_trend, Aggregation, Comparison, CrossingTrend,
    Dimension, Metric, Scored,
};
use chartbench_core::{BenchmarkItem, Condition, Part};
use serde::{Deserialize, Serialize};

use crate::io::{csv_field, index_items, write_atomic, write_json, ScoreRow};
use crate::render::{Anchor, Canvas, Rgb};

/// Metrics tested between conditions.
pub const COMPARED_METRICS: [Metric; 6] = [
    Metric::RmsTbeF1,
    Metric::RmsTbeF1Sig,
    Metric::TbeRaw,
    Metric::RnssTbeF1,
    Metric::Ses,
    Metric::RmsF1,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAnalysis {
    pub model: String,
    pub prompt_variant: PromptVariant,
    pub n_scores: usize,
    pub aggregates: Vec<Aggregation>,
    pub comparisons: Vec<Comparison>,
    /// Comparisons that could not be run, with the reason.
    pub skipped_comparisons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    /// Part-A image counts per digit length.
    pub images_per_digit_length: BTreeMap<u8, u64>,
    pub digit_length_cv: Option<f64>,
    pub crossings: Option<CrossingTrend>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub dataset: DatasetStats,
    pub models: Vec<ModelAnalysis>,
}

/// Imbalance and crossing statistics of the manifest itself.
pub fn dataset_stats(manifest: &Manifest) -> Result<DatasetStats> {
    let mut per_dl: BTreeMap<u8, u64> = manifest.config.digit_lengths.iter().map(|&d| (d, 0)).collect();
    for item in manifest.items.iter().filter(|i| i.part == Part::A) {
        *per_dl.entry(item.digit_length).or_default() += 1;
    }
    let counts: Vec<u64> = per_dl.values().copied().collect();
    let crossings = {
        let tables = manifest.base_table_ids().filter_map(|id| manifest.ground_truth.get(id));
        crossing_trend(tables).ok()
    };
    Ok(DatasetStats {
        digit_length_cv: coefficient_of_variation(&counts).ok(),
        images_per_digit_length: per_dl,
        crossings,
    })
}

/// Which items a dimension is aggregated over: Part-A dimensions use all of
/// Part A; the condition dimensions compare three-entity base charts against
/// their variants.
fn in_scope(dim: Dimension, item: &BenchmarkItem) -> bool {
    match dim {
        Dimension::DigitLength | Dimension::EntityCount | Dimension::ChartType => item.part == Part::A,
        Dimension::MajorTicks | Dimension::RangeVariant | Dimension::Format => {
            item.entity_count == 3 && dim.key(item).is_some()
        }
    }
}

fn varies(dim: Dimension, items: &[&BenchmarkItem]) -> bool {
    match dim {
        Dimension::DigitLength | Dimension::EntityCount | Dimension::ChartType => items.iter().any(|i| i.part == Part::A),
        _ => items.iter().any(|i| i.condition != Condition::Base && dim.key(i).is_some()),
    }
}

/// Aggregates and paired tests per (model, prompt variant).
pub fn analyze(manifest: &Manifest, rows: &[ScoreRow]) -> Result<AnalysisReport> {
    let items = index_items(manifest);
    let mut by_run: BTreeMap<(String, &'static str), Vec<Scored<'_>>> = BTreeMap::new();
    let mut variants = BTreeMap::new();
    for row in rows {
        let item = items
            .get(row.item_id.as_str())
            .ok_or_else(|| anyhow!("score for unknown item {}", row.item_id))?;
        by_run
            .entry((row.model.clone(), row.prompt_variant.as_str()))
            .or_default()
            .push(Scored { item, record: &row.record });
        variants.insert((row.model.clone(), row.prompt_variant.as_str()), row.prompt_variant);
    }

    let mut models = Vec::new();
    for (key, scored) in &by_run {
        let run_items: Vec<&BenchmarkItem> = scored.iter().map(|s| s.item).collect();
        let mut aggregates = Vec::new();
        for dim in Dimension::ALL {
            if !varies(dim, &run_items) {
                continue;
            }
            let subset: Vec<Scored> = scored.iter().copied().filter(|s| in_scope(dim, s.item)).collect();
            aggregates.push(aggregate(&subset, dim));
        }
        let present: Vec<Condition> = Condition::ALL
            .into_iter()
            .filter(|c| *c != Condition::Base && run_items.iter().any(|i| i.condition == *c))
            .collect();
        let mut comparisons = Vec::new();
        let mut skipped = Vec::new();
        for other in present {
            for metric in COMPARED_METRICS {
                match compare_conditions(scored, Condition::Base, other, metric) {
                    Ok(c) => comparisons.push(c),
                    Err(e) => skipped.push(format!("base vs {} on {}: {e}", other.as_str(), metric.as_str())),
                }
            }
        }
        models.push(ModelAnalysis {
            model: key.0.clone(),
            prompt_variant: variants[key],
            n_scores: scored.len(),
            aggregates,
            comparisons,
            skipped_comparisons: skipped,
        });
    }
    Ok(AnalysisReport {
        schema_version: SCHEMA_VERSION,
        dataset: dataset_stats(manifest)?,
        models,
    })
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

/// Writes per-dimension CSVs and plots, a comparison CSV per run and the
/// dataset statistics. Fails without writing anything when there are no
/// scores.
pub fn emit_report(report: &AnalysisReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if report.models.iter().all(|m| m.n_scores == 0) {
        bail!("no scores to report");
    }
    let mut written = Vec::new();
    for run in &report.models {
        let stem = format!("{}_{}", slug(&run.model), run.prompt_variant.as_str());
        for agg in &run.aggregates {
            if agg.groups.is_empty() {
                continue;
            }
            let csv = out_dir.join(format!("{stem}_{}.csv", agg.dimension.as_str()));
            write_atomic(&csv, aggregation_csv(agg).as_bytes())?;
            written.push(csv);
            let png = out_dir.join(format!("{stem}_{}.png", agg.dimension.as_str()));
            write_atomic(&png, &plot_aggregation(agg, &run.model))?;
            written.push(png);
        }
        if !run.comparisons.is_empty() {
            let csv = out_dir.join(format!("{stem}_comparisons.csv"));
            write_atomic(&csv, comparisons_csv(&run.comparisons).as_bytes())?;
            written.push(csv);
        }
    }
    let json = out_dir.join("dataset.json");
    write_json(&json, &report.dataset)?;
    written.push(json);
    Ok(written)
}

pub fn aggregation_csv(agg: &Aggregation) -> String {
    let mut out = String::from("group,n");
    for m in Metric::ALL {
        out.push(',');
        out.push_str(m.as_str());
    }
    out.push('\n');
    for g in &agg.groups {
        out.push_str(&csv_field(&g.key.label()));
        out.push_str(&format!(",{}", g.n));
        for m in Metric::ALL {
            out.push_str(&format!(",{:.4}", g.mean(m)));
        }
        out.push('\n');
    }
    out
}

pub fn comparisons_csv(comparisons: &[Comparison]) -> String {
    let mut out =
        String::from("base,other,metric,statistic,p_value,direction,n_pairs,unpaired_base,unpaired_other\n");
    for c in comparisons {
        out.push_str(&format!(
            "{},{},{},{},{:.6e},{},{},{},{}\n",
            c.base.as_str(),
            c.other.as_str(),
            c.metric.as_str(),
            c.test.statistic,
            c.test.p_value,
            c.test.direction.as_str(),
            c.test.n_pairs,
            c.unpaired_base,
            c.unpaired_other
        ));
    }
    out
}

const PLOTTED: [Metric; 4] = [Metric::RmsTbeF1, Metric::RmsTbeF1Sig, Metric::RnssTbeF1, Metric::Ses];
const PLOT_COLORS: [Rgb; 4] = [Rgb([31, 119, 180]), Rgb([255, 127, 14]), Rgb([44, 160, 44]), Rgb([214, 39, 40])];

/// Line plot of the bounded group means (percent) along the dimension.
pub fn plot_aggregation(agg: &Aggregation, title: &str) -> Vec<u8> {
    let (w, h) = (720u32, 420u32);
    let mut c = Canvas::new(w, h, Rgb::WHITE);
    let values = agg.groups.iter().flat_map(|g| PLOTTED.map(|m| g.mean(m)));
    let lo = values.fold(0.0f64, f64::min);
    let lo = (lo / 20.0).floor() * 20.0;
    let (left, right, top, bottom) = (60.0, f64::from(w) - 20.0, 70.0, f64::from(h) - 50.0);
    let y = |v: f64| bottom - (v - lo) / (100.0 - lo) * (bottom - top);
    let grey = Rgb([220, 220, 220]);
    let ink = Rgb([40, 40, 40]);

    c.text(&format!("{title} by {}", agg.dimension.as_str()), f64::from(w) / 2.0, 22.0, 15.0, Anchor::Center, ink);
    let mut tick = lo;
    while tick <= 100.0 + 1e-9 {
        let py = y(tick);
        c.line((left, py), (right, py), 1.0, grey);
        c.text(&format!("{tick}"), left - 8.0, py + 4.5, 12.0, Anchor::Right, ink);
        tick += 20.0;
    }
    let n = agg.groups.len().max(1);
    let band = (right - left) / n as f64;
    let x = |i: usize| left + band * (i as f64 + 0.5);
    for (i, g) in agg.groups.iter().enumerate() {
        c.text(&g.key.label(), x(i), bottom + 20.0, 12.0, Anchor::Center, ink);
    }
    for (k, m) in PLOTTED.iter().enumerate() {
        let pts: Vec<(f64, f64)> = agg.groups.iter().enumerate().map(|(i, g)| (x(i), y(g.mean(*m)))).collect();
        for pair in pts.windows(2) {
            c.line(pair[0], pair[1], 2.0, PLOT_COLORS[k]);
        }
        for &(px, py) in &pts {
            c.disc(px, py, 3.0, PLOT_COLORS[k]);
        }
        let lx = left + k as f64 * 150.0;
        c.fill_rect(lx, 40.0, lx + 12.0, 52.0, PLOT_COLORS[k]);
        c.text(m.as_str(), lx + 16.0, 51.0, 12.0, Anchor::Left, ink);
    }
    c.line((left, top), (left, bottom), 1.0, ink);
    c.line((left, bottom), (right, bottom), 1.0, ink);
    c.encode_png()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chartbench_core::generate::{generate_manifest, GenConfig};
    use chartbench_core::metrics::ScoreRecord;
    use chartbench_core::parse::Dialect;

    fn rows_for(manifest: &Manifest, f: impl Fn(&BenchmarkItem) -> f64) -> Vec<ScoreRow> {
        manifest
            .items
            .iter()
            .map(|i| {
                let v = f(i);
                ScoreRow {
                    schema_version: SCHEMA_VERSION,
                    item_id: i.id.clone(),
                    model: "m/1".into(),
                    prompt_variant: PromptVariant::Plain,
                    parse_failed: false,
                    dialect: Dialect::Linearized,
                    unparsed_cells: 0,
                    record: ScoreRecord {
                        rms_f1: v,
                        rms_f1_no_header: v,
                        rms_tbe_f1: v,
                        rms_tbe_f1_sig: v,
                        tbe_raw: 0.0,
                        rnss_tbe_f1: v,
                        ses: 0.0,
                        n_sig_cells: 0,
                        t_used: 1.0,
                        matched: 0,
                        unmatched_truth: 0,
                        unmatched_pred: 0,
                    },
                }
            })
            .collect()
    }

    #[test]
    fn part_a_only_report() {
        let m = generate_manifest(&GenConfig {
            parts: vec![Part::A],
            digit_lengths: vec![0, 1, 2],
            ..GenConfig::default()
        })
        .unwrap();
        let report = analyze(&m, &rows_for(&m, |_| 1.0)).unwrap();
        assert_eq!(report.dataset.digit_length_cv, Some(0.0));
        let run = &report.models[0];
        let dims: Vec<Dimension> = run.aggregates.iter().map(|a| a.dimension).collect();
        assert_eq!(dims, [Dimension::DigitLength, Dimension::EntityCount, Dimension::ChartType]);
        assert!(run.comparisons.is_empty());
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&report, dir.path()).unwrap();
        assert!(files.iter().any(|f| f.ends_with("m_1_plain_digit_length.csv")));
        assert!(files.iter().any(|f| f.ends_with("m_1_plain_digit_length.png")));
        let csv = std::fs::read_to_string(dir.path().join("m_1_plain_digit_length.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(1).unwrap().starts_with("0,180,100.0000"));
    }

    #[test]
    fn conditions_are_compared() {
        let m = generate_manifest(&GenConfig {
            parts: vec![Part::A, Part::C],
            digit_lengths: vec![1, 2],
            entity_counts: vec![3],
            ..GenConfig::default()
        })
        .unwrap();
        let rows = rows_for(&m, |i| if i.condition == Condition::Neg { 0.2 } else { 0.9 });
        let report = analyze(&m, &rows).unwrap();
        let run = &report.models[0];
        let neg = run
            .comparisons
            .iter()
            .find(|c| c.other == Condition::Neg && c.metric == Metric::RmsTbeF1)
            .unwrap();
        assert_eq!(neg.test.n_pairs, 60);
        assert_eq!(neg.test.direction, chartbench_core::stats::Direction::BaseBetter);
        let pos = run
            .comparisons
            .iter()
            .find(|c| c.other == Condition::Pos && c.metric == Metric::RmsTbeF1)
            .unwrap();
        assert_eq!(pos.test.p_value, 1.0);
        let range = run.aggregates.iter().find(|a| a.dimension == Dimension::RangeVariant).unwrap();
        assert_eq!(range.groups.len(), 4);
    }

    #[test]
    fn empty_scores_write_nothing() {
        let m = generate_manifest(&GenConfig {
            parts: vec![Part::A],
            digit_lengths: vec![1],
            ..GenConfig::default()
        })
        .unwrap();
        let report = analyze(&m, &[]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_report(&report, dir.path()).is_err());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
