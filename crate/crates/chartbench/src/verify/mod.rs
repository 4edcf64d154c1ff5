//! Self-contained acceptance checks, run by `chartbench verify` and the
//! `acceptance` test target. None of them needs network access.

pub mod oracle;

use std::fmt::Write as _;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use anyhow::{ensure, Context as _, Result};
use chartbench_core::generate::{generate_manifest, GenConfig, Manifest};
use chartbench_core::metrics::{d_rms, d_tbe, match_headers, match_values, rms_tbe_f1, score};
use chartbench_core::numformat::{format_tick, parse_number, TickFormat};
use chartbench_core::parse::{canonicalize_header, write_linearized};
use chartbench_core::prompt::PromptVariant;
use chartbench_core::stats::{
    coefficient_of_variation, count_crossings, crossing_trend, wilcoxon_signed_rank_with, Metric, WilcoxonMode, ALPHA,
};
use chartbench_core::{digit_length, AxisSpec, DataTable, Part};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::analyze;
use crate::filter::ItemFilter;
use crate::io::PredictionRecord;
use crate::render::{render_manifest, RenderOptions, StyleSpec};
use crate::score::score_predictions;

pub struct Check {
    pub id: u8,
    pub name: &'static str,
    pub summary: &'static str,
    run: fn(&Shared) -> Result<String>,
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {:<22} {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Lazily generated default manifest shared between checks.
#[derive(Default)]
pub struct Shared {
    manifest: OnceLock<std::result::Result<(Manifest, Duration), String>>,
}

impl Shared {
    fn default_manifest(&self) -> Result<(&Manifest, Duration)> {
        let r = self.manifest.get_or_init(|| {
            let start = Instant::now();
            generate_manifest(&GenConfig::default())
                .map(|m| (m, start.elapsed()))
                .map_err(|e| e.to_string())
        });
        match r {
            Ok((m, d)) => Ok((m, *d)),
            Err(e) => Err(anyhow::anyhow!("default manifest generation failed: {e}")),
        }
    }
}

pub fn checks() -> Vec<Check> {
    vec![
        Check { id: 1, name: "dataset-counts", summary: "1020 tables, 3060 Part-A and 7140 total images, 60 tables per digit length", run: dataset_counts },
        Check { id: 2, name: "zero-imbalance", summary: "CV of Part-A counts is 0; CV fixture gives 1.72 +/- 0.01", run: zero_imbalance },
        Check { id: 3, name: "two-point-example", summary: "equal 200-point errors at t=400: d_tbe 0.5 twice, d_rms 0.33 / 0.02, F1 0.5", run: two_point_example },
        Check { id: 4, name: "metric-bounds", summary: "10,000 random triples: ranges, SES identity, identity score, scale equivariance", run: metric_bounds },
        Check { id: 5, name: "matching-oracle", summary: "header and value matching equal brute-force minima", run: matching_oracle },
        Check { id: 6, name: "format-round-trip", summary: "every manifest tick survives every format; exemplar labels parse exactly", run: format_round_trip },
        Check { id: 7, name: "digit-length-law", summary: "every generated cell has its item's digit length", run: digit_length_law },
        Check { id: 8, name: "wilcoxon-oracle", summary: "exact p equals sign enumeration (n<=12); normal within 0.01 at n=25", run: wilcoxon_oracle },
        Check { id: 9, name: "crossings", summary: "fixtures 0 and 1; crossings per entity increase with entity count, r > 0.9", run: crossings },
        Check { id: 10, name: "swap-sensitivity", summary: "entity-swapped exact values give SES >= 0.9; exact predictions SES = 0", run: swap_sensitivity },
        Check { id: 11, name: "end-to-end", summary: "generate, render, score truth, analyze: every group mean is 100", run: end_to_end },
    ]
}

/// Runs the selected checks (all when `only` is empty) in id order.
pub fn run(only: &[u8]) -> Vec<CheckOutcome> {
    let ctx = Shared::default();
    checks()
        .into_iter()
        .filter(|c| only.is_empty() || only.contains(&c.id))
        .map(|c| {
            let start = Instant::now();
            let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| (c.run)(&ctx)));
            let (passed, detail) = match result {
                Ok(Ok(detail)) => (true, detail),
                Ok(Err(e)) => (false, format!("{e:#}")),
                Err(_) => (false, "check panicked".to_string()),
            };
            CheckOutcome {
                id: c.id,
                name: c.name,
                passed,
                detail,
                elapsed: start.elapsed(),
            }
        })
        .collect()
}

fn rng(stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed_0000 + stream)
}

fn headers(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn axis_with_t(t: f64) -> AxisSpec {
    AxisSpec::from_ticks((0..6).map(|i| f64::from(i) * 5.0 * t).collect(), TickFormat::Plain).expect("valid ticks")
}

fn dataset_counts(ctx: &Shared) -> Result<String> {
    let (m, took) = ctx.default_manifest()?;
    let tables = m.base_table_ids().count();
    let part_a = m.count_part(Part::A);
    ensure!(tables == 1020, "expected 1020 tables, got {tables}");
    ensure!(part_a == 3060, "expected 3060 Part-A images, got {part_a}");
    ensure!(m.items.len() == 7140, "expected 7140 images, got {}", m.items.len());
    for dl in 0..=16u8 {
        let images = m.items.iter().filter(|i| i.part == Part::A && i.digit_length == dl).count();
        let tables = m
            .items
            .iter()
            .filter(|i| i.part == Part::A && i.digit_length == dl)
            .map(|i| i.table_id.as_str())
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        ensure!(images == 180 && tables == 60, "digit length {dl}: {tables} tables, {images} images");
    }
    ensure!(took < Duration::from_secs(300), "generation took {took:?}");
    Ok(format!("tables=1020 partA=3060 total=7140, 60 tables/180 images per digit length, generated in {:.2}s", took.as_secs_f64()))
}

fn zero_imbalance(ctx: &Shared) -> Result<String> {
    let (m, _) = ctx.default_manifest()?;
    let counts: Vec<u64> = (0..=16u8)
        .map(|dl| m.items.iter().filter(|i| i.part == Part::A && i.digit_length == dl).count() as u64)
        .collect();
    let cv = coefficient_of_variation(&counts)?;
    ensure!(cv == 0.0, "Part-A CV is {cv}");
    // Ten buckets with mean 8769.6 and population standard deviation 15040.9.
    let fixture = [21199u64, 50497, 2000, 2000, 2000, 2000, 2000, 2000, 2000, 2000];
    let n = fixture.len() as f64;
    let mean = fixture.iter().sum::<u64>() as f64 / n;
    let std = (fixture.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / n).sqrt();
    ensure!((mean - 8769.6).abs() < 1e-9 && (std - 15040.9).abs() < 0.05, "fixture mean {mean} std {std}");
    let skewed = coefficient_of_variation(&fixture)?;
    ensure!((skewed - 1.72).abs() <= 0.01, "fixture CV {skewed}");
    Ok(format!("Part-A CV = {cv:.2}; fixture (std {std:.1}, mean {mean:.1}) CV = {skewed:.4}"))
}

fn two_point_example(_: &Shared) -> Result<String> {
    let (g, p, t) = ([600.0, 10000.0], [400.0, 9800.0], 400.0);
    let tbe: Vec<f64> = (0..2).map(|i| d_tbe(g[i], p[i], t)).collect::<std::result::Result<_, _>>()?;
    let rms: Vec<f64> = (0..2).map(|i| d_rms(g[i], p[i])).collect();
    ensure!(tbe == [0.5, 0.5], "d_tbe = {tbe:?}");
    // Errors beyond one minor tick saturate.
    let far = d_tbe(600.0, 600.0 + 10.0 * t, t)?;
    ensure!(far == 1.0, "d_tbe does not saturate at 1: {far}");
    ensure!((rms[0] - 0.33).abs() <= 0.005 && (rms[1] - 0.02).abs() <= 0.005, "d_rms = {rms:?}");
    let truth = DataTable::from_values("g", headers("x", 2), vec!["value".into()], vec![vec![g[0]], vec![g[1]]]);
    let pred = DataTable::from_values("p", headers("x", 2), vec!["value".into()], vec![vec![p[0]], vec![p[1]]]);
    let f1 = rms_tbe_f1(&truth, &pred, &axis_with_t(t))?;
    ensure!(f1 == 0.5, "rms_tbe_f1 = {f1}");
    Ok(format!("d_tbe = {tbe:?}, d_rms = [{:.4}, {:.4}], rms_tbe_f1 = {f1}", rms[0], rms[1]))
}

/// A random table with `rows x cols` values drawn around `scale`.
fn random_table(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DataTable {
    let values = (0..rows)
        .map(|_| (0..cols).map(|_| (rng.random_range(-1000..=9000) as f64 / 1000.0) * scale).collect())
        .collect();
    DataTable::from_values("r", headers("row", rows), headers("entity", cols), values)
}

/// A plausible model output: noise, dropped or extra rows, renamed or
/// permuted entities, absent cells.
fn perturb(rng: &mut ChaCha8Rng, truth: &DataTable, t: f64) -> DataTable {
    let mut pred = truth.map_values(|v| v + rng.random_range(-3.0..3.0) * t * f64::from(rng.random_range(0..2u8)));
    match rng.random_range(0..6) {
        0 => {
            pred.cells.pop();
            pred.row_headers.pop();
        }
        1 => {
            pred.row_headers.push("extra".into());
            pred.cells.push(vec![Some(t); pred.n_cols()]);
        }
        2 => pred.col_headers.reverse(),
        3 => {
            if let Some(h) = pred.col_headers.first_mut() {
                *h = format!("{h}x");
            }
        }
        4 => {
            let (r, c) = (rng.random_range(0..pred.n_rows()), rng.random_range(0..pred.n_cols()));
            pred.cells[r][c] = None;
        }
        _ => {}
    }
    if pred.cells.is_empty() {
        pred = DataTable::empty("p");
    }
    pred
}

fn metric_bounds(_: &Shared) -> Result<String> {
    let mut rng = rng(4);
    let mut worst_scale = 0.0f64;
    for case in 0..10_000 {
        let (rows, cols) = (rng.random_range(1..=4), rng.random_range(1..=3));
        let scale = 10f64.powi(rng.random_range(-2..=12));
        let truth = random_table(&mut rng, rows, cols, scale);
        let t = scale * [0.04, 0.1, 0.2, 0.5, 1.0][rng.random_range(0..5)];
        let axis = axis_with_t(t);
        let pred = perturb(&mut rng, &truth, t);
        let r = score(&truth, &pred, &axis)?;
        ensure!(r.is_consistent(), "case {case}: inconsistent record {r:?}");
        ensure!(r.ses == r.rnss_tbe_f1 - r.rms_tbe_f1, "case {case}: ses identity");
        let id = score(&truth, &truth, &axis)?;
        ensure!(id.rms_tbe_f1 == 1.0, "case {case}: identity scored {}", id.rms_tbe_f1);
        // Integer mantissas on a shared binary exponent, and c = odd * 2^k:
        // every rescaled input is exactly representable, so any deviation
        // comes from d_tbe itself rather than from rounding c*g and c*p.
        let e = rng.random_range(-30..=30);
        let unit = 2f64.powi(e);
        let g = f64::from(rng.random_range(-(1i32 << 30)..(1 << 30))) * unit;
        let p = f64::from(rng.random_range(-(1i32 << 30)..(1 << 30))) * unit;
        let t = f64::from(rng.random_range(1i32..(1 << 30))) * unit;
        let c = f64::from(rng.random_range(0u32..(1 << 19)) * 2 + 1) * 2f64.powi(rng.random_range(-30..=30));
        let (a, b) = (d_tbe(c * g, c * p, c * t)?, d_tbe(g, p, t)?);
        ensure!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b), "case {case}: d_tbe out of [0, 1]");
        let rel = if b == 0.0 { a.abs() } else { ((a - b) / b).abs() };
        worst_scale = worst_scale.max(rel);
        ensure!(rel <= 1e-12, "case {case}: d_tbe not scale-equivariant ({a} vs {b})");
    }
    Ok(format!("10000 triples in range, SES identity exact, identity = 1, max scale deviation {worst_scale:.1e}"))
}

fn matching_oracle(_: &Shared) -> Result<String> {
    let mut rng = rng(5);
    let mut checked = 0;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (rows, cols) = (rng.random_range(1..=3), rng.random_range(1..=2));
        if rows * cols > 6 {
            continue;
        }
        let truth = random_table(&mut rng, rows, cols, 10.0);
        let t = 0.4;
        let mut pred = perturb(&mut rng, &truth, t);
        if rng.random_bool(0.5) {
            pred.col_headers.shuffle(&mut rng);
        }
        if pred.n_rows() * pred.n_cols() > 6 || pred.is_empty() {
            continue;
        }
        checked += 1;
        let tp: Vec<_> = truth.datapoints().collect();
        let pp: Vec<_> = pred.datapoints().collect();
        let header_cost: Vec<Vec<f64>> = pp
            .iter()
            .map(|p| {
                tp.iter()
                    .map(|g| {
                        let row = oracle::levenshtein_ratio(&canonicalize_header(g.row), &canonicalize_header(p.row));
                        let col = oracle::levenshtein_ratio(&canonicalize_header(g.col), &canonicalize_header(p.col));
                        (row + col) / 2.0
                    })
                    .collect()
            })
            .collect();
        let value_cost: Vec<Vec<f64>> = pp
            .iter()
            .map(|p| {
                tp.iter()
                    .map(|g| match p.value {
                        Some(v) => ((g.value.unwrap_or(0.0) - v).abs() / t).min(1.0),
                        None => 1.0,
                    })
                    .collect()
            })
            .collect();
        let h = match_headers(&truth, &pred);
        let v = match_values(&truth, &pred, t)?;
        let (h_ref, v_ref) = (oracle::brute_force_min_cost(&header_cost), oracle::brute_force_min_cost(&value_cost));
        let dev = (h.total_cost - h_ref).abs().max((v.total_cost - v_ref).abs());
        worst = worst.max(dev);
        ensure!(dev <= 1e-12, "matching cost differs from brute force: {} vs {h_ref}, {} vs {v_ref}", h.total_cost, v.total_cost);
        ensure!(h.pairs.len() == tp.len().min(pp.len()), "header matching is not maximal");
    }
    ensure!(checked > 300, "only {checked} fixtures qualified");
    Ok(format!("{checked} fixtures with <= 6 datapoints match brute force (max deviation {worst:.1e})"))
}

fn format_round_trip(ctx: &Shared) -> Result<String> {
    let (m, _) = ctx.default_manifest()?;
    let mut ticks: Vec<f64> = m.items.iter().flat_map(|i| i.axis.tick_values.iter().copied()).collect();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    let formats = [TickFormat::Plain, TickFormat::Comma, TickFormat::Scientific, TickFormat::Abbrev];
    for &v in &ticks {
        for f in formats {
            let label = format_tick(v, f);
            let back = parse_number(&label).with_context(|| format!("parsing {label:?}"))?;
            let rel = if v == 0.0 { back.abs() } else { ((back - v) / v).abs() };
            ensure!(rel <= 1e-6, "{v} as {f:?} -> {label:?} -> {back}");
        }
    }
    for (s, want) in [("7,000", 7000.0), ("7.00e+6", 7_000_000.0), ("7K", 7000.0)] {
        let got = parse_number(s)?;
        ensure!(got == want, "{s:?} parsed to {got}");
    }
    Ok(format!("{} distinct ticks x 4 formats round-trip; \"7,000\", \"7.00e+6\", \"7K\" exact", ticks.len()))
}

fn digit_length_law(ctx: &Shared) -> Result<String> {
    let (m, _) = ctx.default_manifest()?;
    let mut cells = 0usize;
    let mut via_source = 0usize;
    for item in &m.items {
        // Range-shifted items are labelled by the table they were shifted
        // from; the law is checked on that source table.
        let table = m
            .ground_truth
            .get(&item.base_table_id)
            .with_context(|| format!("{}: missing source table", item.id))?;
        if item.table_id != item.base_table_id {
            via_source += 1;
        }
        for v in table.values() {
            let dl = digit_length(v)?;
            ensure!(dl == u32::from(item.digit_length), "{}: cell {v} has digit length {dl}", item.id);
            cells += 1;
        }
    }
    Ok(format!("{cells} cells over {} items ({via_source} shifted items checked on their source table)", m.items.len()))
}

fn wilcoxon_oracle(_: &Shared) -> Result<String> {
    let mut rng = rng(8);
    let mut samples = 0;
    while samples < 100 {
        let n = rng.random_range(5..=12);
        // Coarse values so ties and zero differences occur.
        let x: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..8u8)) / 2.0).collect();
        let y: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..8u8)) / 2.0).collect();
        let diffs: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        if diffs.iter().filter(|d| **d != 0.0).count() < 5 {
            continue;
        }
        samples += 1;
        let got = wilcoxon_signed_rank_with(&x, &y, WilcoxonMode::Exact, ALPHA)?.p_value;
        let want = oracle::signed_rank_p(&diffs);
        ensure!((got - want).abs() <= 1e-12, "exact p {got} vs enumeration {want} for {diffs:?}");
    }
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let shift = rng.random_range(-0.6..0.6);
        let x: Vec<f64> = (0..25).map(|_| rng.random_range(0.0..1.0) + shift).collect();
        let y: Vec<f64> = (0..25).map(|_| rng.random_range(0.0..1.0)).collect();
        let exact = wilcoxon_signed_rank_with(&x, &y, WilcoxonMode::Exact, ALPHA)?.p_value;
        let normal = wilcoxon_signed_rank_with(&x, &y, WilcoxonMode::Normal, ALPHA)?.p_value;
        worst = worst.max((exact - normal).abs());
    }
    ensure!(worst <= 0.01, "normal approximation off by {worst} at n = 25");
    Ok(format!("100 samples match enumeration; max |normal - exact| at n=25 = {worst:.4}"))
}

fn crossings(ctx: &Shared) -> Result<String> {
    let two = |a: [f64; 2], b: [f64; 2]| {
        DataTable::from_values("c", headers("x", 2), headers("e", 2), vec![vec![a[0], b[0]], vec![a[1], b[1]]])
    };
    let parallel = count_crossings(&two([1.0, 2.0], [3.0, 4.0]))?;
    ensure!(parallel.total == 0, "parallel lines: {}", parallel.total);
    let single = count_crossings(&two([1.0, 3.0], [3.0, 1.0]))?;
    ensure!(single.total == 1 && single.avg_per_entity == 0.5, "single crossing: {single:?}");

    let (m, _) = ctx.default_manifest()?;
    let tables: Vec<&DataTable> = m.base_table_ids().filter_map(|id| m.ground_truth.get(id)).collect();
    for t in tables.iter().filter(|t| t.n_cols() >= 2).take(200) {
        let mut want = 0;
        for a in 0..t.n_cols() {
            for b in a + 1..t.n_cols() {
                let col = |c: usize| t.column(c).into_iter().map(|v| v.unwrap_or(f64::NAN)).collect::<Vec<_>>();
                want += oracle::pair_crossings(&col(a), &col(b));
            }
        }
        ensure!(count_crossings(t)?.total == want, "{}: crossing count differs from pairwise oracle", t.id);
    }
    let trend = crossing_trend(tables.iter().copied())?;
    ensure!(trend.strictly_increasing(), "not strictly increasing: {:?}", trend.groups);
    ensure!(trend.per_group_pearson > 0.9, "Pearson {}", trend.per_group_pearson);
    let means: Vec<String> = trend.groups.iter().map(|g| format!("{}:{:.3}", g.0, g.2)).collect();
    Ok(format!(
        "fixtures 0/1; avg per entity {}; Pearson per group {:.4}, per table {:.4}",
        means.join(" "),
        trend.per_group_pearson,
        trend.per_table_pearson
    ))
}

fn swap_sensitivity(_: &Shared) -> Result<String> {
    let mut rng = rng(10);
    let mut min_swapped = f64::INFINITY;
    for _ in 0..500 {
        let (rows, cols) = (rng.random_range(1..=4), rng.random_range(2..=6));
        let t = 10f64.powi(rng.random_range(-2..=6));
        // Distinct multiples of 1.5t: every pairwise gap is at least t.
        let mut slots: Vec<u32> = (0..(rows * cols * 3) as u32).collect();
        slots.shuffle(&mut rng);
        let values: Vec<Vec<f64>> = (0..rows)
            .map(|r| (0..cols).map(|c| f64::from(slots[r * cols + c]) * 1.5 * t).collect())
            .collect();
        let truth = DataTable::from_values("g", headers("x", rows), headers("entity", cols), values);
        let axis = axis_with_t(t);
        // Every entity's series moves to the next entity's column.
        let mut swapped = truth.clone();
        for row in &mut swapped.cells {
            row.rotate_left(1);
        }
        let s = score(&truth, &swapped, &axis)?;
        min_swapped = min_swapped.min(s.ses);
        ensure!(s.ses >= 0.9, "swapped prediction SES {}", s.ses);
        let exact = score(&truth, &truth, &axis)?;
        ensure!(exact.ses == 0.0, "exact prediction SES {}", exact.ses);
    }
    Ok(format!("500 tables: min SES for swapped entities {min_swapped:.3}, exact predictions 0"))
}

fn end_to_end(_: &Shared) -> Result<String> {
    let start = Instant::now();
    let dir = tempfile::tempdir()?;
    let config = GenConfig {
        parts: vec![Part::A],
        digit_lengths: vec![0, 1, 2],
        ..GenConfig::default()
    };
    let mut manifest = generate_manifest(&config)?;
    let style = StyleSpec::default();
    let report = render_manifest(
        &mut manifest,
        &style,
        &dir.path().join("images"),
        &ItemFilter::all(),
        &RenderOptions::default(),
    )?;
    ensure!(report.is_complete(), "render failures: {:?}", report.failed.first());
    ensure!(report.written == 540, "rendered {} images", report.written);
    let predictions: Vec<PredictionRecord> = manifest
        .items
        .iter()
        .map(|item| PredictionRecord {
            item_id: item.id.clone(),
            model: "ground-truth".into(),
            prompt_variant: PromptVariant::Plain,
            raw_text: write_linearized(manifest.truth_for(item).expect("truth")),
            timestamp: crate::io::now_rfc3339(),
            attempts: 1,
            error: None,
            error_message: None,
        })
        .collect();
    let scored = score_predictions(&manifest, &predictions)?;
    ensure!(scored.parse_failures() == 0, "{} parse failures", scored.parse_failures());
    let analysis = analyze(&manifest, &scored.rows)?;
    let mut groups = 0;
    let mut detail = String::new();
    for run in &analysis.models {
        for agg in &run.aggregates {
            for g in &agg.groups {
                groups += 1;
                let mean = g.mean(Metric::RmsTbeF1);
                ensure!(mean == 100.0, "{} group {} mean {mean}", agg.dimension.as_str(), g.key.label());
            }
            let _ = write!(detail, "{}x{} ", agg.dimension.as_str(), agg.groups.len());
        }
    }
    ensure!(groups > 0, "no groups aggregated");
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(600), "took {took:?}");
    Ok(format!("540 images; {groups} groups ({}) all at 100.0; {:.1}s", detail.trim(), took.as_secs_f64()))
}
