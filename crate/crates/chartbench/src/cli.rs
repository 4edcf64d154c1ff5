//! `chartbench` command line: generate → render → query (or import) →
//! score → analyze → report, plus the offline `verify` suite.
//!
//! Exit codes: 0 success, 1 check or pipeline failure, 2 usage or
//! configuration error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Result};
use chartbench_core::generate::{generate_manifest, GenConfig, Manifest};
use chartbench_core::parse::write_linearized;
use chartbench_core::prompt::PromptVariant;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::analysis::{analyze, emit_report, AnalysisReport};
use crate::client::{load_successful, run_batch, Client, EndpointConfig, PredictionStore};
use crate::filter::{parse_parts, ItemFilter};
use crate::io::{
    index_items, now_rfc3339, read_config, read_json, read_jsonl, read_manifest, write_json, write_jsonl,
    write_scores_csv, PredictionRecord, ScoreRow,
};
use crate::render::{render_manifest, RenderOptions, StyleSpec};
use crate::score::score_predictions;
use crate::verify;

#[derive(Debug, Parser)]
#[command(name = "chartbench", version, about = "Chart-to-table benchmark toolkit")]
pub struct Cli {
    /// Print a machine-readable JSON summary on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate ground-truth tables and the benchmark manifest.
    Generate(GenerateArgs),
    /// Render chart images for manifest items.
    Render(RenderArgs),
    /// Query a model endpoint for every selected item.
    Query(QueryArgs),
    /// Import third-party prediction dumps (JSON Lines).
    Import(ImportArgs),
    /// Score predictions against the ground truth.
    Score(ScoreArgs),
    /// Aggregate scores by dimension and run paired significance tests.
    Analyze(AnalyzeArgs),
    /// Write CSV tables and plots from an analysis.
    Report(ReportArgs),
    /// Run the offline acceptance checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Parts to include, e.g. `A,B`.
    #[arg(long)]
    pub parts: Option<String>,
    /// Generation config (TOML or JSON); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ManifestArg {
    #[arg(long, default_value = "out/manifest.json")]
    pub manifest: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub manifest: ManifestArg,
    /// Image directory; defaults to `images/` next to the manifest.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Style file (TOML or JSON).
    #[arg(long)]
    pub style: Option<PathBuf>,
    #[arg(long)]
    pub filter: Option<ItemFilter>,
    /// Re-render images that already exist.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[command(flatten)]
    pub manifest: ManifestArg,
    /// Endpoint config (TOML or JSON).
    #[arg(long)]
    pub endpoint: PathBuf,
    #[arg(long, default_value = "plain", value_parser = parse_variant)]
    pub variant: PromptVariant,
    #[arg(long)]
    pub filter: Option<ItemFilter>,
    /// Prediction store (JSON Lines); appended to and resumed from.
    #[arg(long, default_value = "out/predictions.jsonl")]
    pub predictions: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    #[command(flatten)]
    pub manifest: ManifestArg,
    /// Dump to import: one JSON object per line with `item_id` and
    /// `raw_text` (or `output`/`text`); `model`, `prompt_variant` and
    /// `timestamp` are optional.
    #[arg(long, required_unless_present = "ground_truth", conflicts_with = "ground_truth")]
    pub input: Option<PathBuf>,
    /// Instead of a dump, import each item's serialized ground truth.
    #[arg(long)]
    pub ground_truth: bool,
    /// Model name for records that do not carry one.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value = "plain", value_parser = parse_variant)]
    pub variant: PromptVariant,
    #[arg(long)]
    pub filter: Option<ItemFilter>,
    #[arg(long, default_value = "out/predictions.jsonl")]
    pub predictions: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub manifest: ManifestArg,
    #[arg(long, default_value = "out/predictions.jsonl")]
    pub predictions: PathBuf,
    /// Score file (JSON Lines); a CSV with the same stem is written too.
    #[arg(long, default_value = "out/scores.jsonl")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub manifest: ManifestArg,
    #[arg(long, default_value = "out/scores.jsonl")]
    pub scores: PathBuf,
    #[arg(long, default_value = "out/analysis.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, default_value = "out/analysis.json")]
    pub analysis: PathBuf,
    #[arg(long, default_value = "out/report")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// List the checks without running them.
    #[arg(long)]
    pub list: bool,
    /// Run only these check ids, e.g. `--only 3,5`.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u8>,
}

fn parse_variant(s: &str) -> Result<PromptVariant, String> {
    PromptVariant::parse(s).ok_or_else(|| format!("unknown prompt variant {s:?} (expected plain or hint)"))
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

fn usage(error: anyhow::Error) -> Failure {
    Failure { code: 2, error }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: 1, error }
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `args` and runs the command, writing human output to `out`.
/// Returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn std::io::Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli, out) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn std::io::Write) -> CmdResult {
    let mut summary = |text: String, value: serde_json::Value| -> CmdResult {
        let line = if cli.json { value.to_string() } else { text };
        writeln!(out, "{line}").map_err(|e| Failure::from(anyhow::Error::from(e)))
    };
    match &cli.command {
        Command::Generate(a) => cmd_generate(a, &mut summary),
        Command::Render(a) => cmd_render(a, &mut summary),
        Command::Query(a) => cmd_query(a, &mut summary),
        Command::Import(a) => cmd_import(a, &mut summary),
        Command::Score(a) => cmd_score(a, &mut summary),
        Command::Analyze(a) => cmd_analyze(a, &mut summary),
        Command::Report(a) => cmd_report(a, &mut summary),
        Command::Verify(a) => cmd_verify(a, &mut summary),
    }
}

type Summary<'a> = dyn FnMut(String, serde_json::Value) -> CmdResult + 'a;

fn load_manifest(arg: &ManifestArg) -> std::result::Result<Manifest, Failure> {
    read_manifest(&arg.manifest).map_err(usage)
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn cmd_generate(a: &GenerateArgs, summary: &mut Summary) -> CmdResult {
    let mut config: GenConfig = match &a.config {
        Some(p) => read_config(p).map_err(usage)?,
        None => GenConfig::default(),
    };
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(parts) = &a.parts {
        config.parts = parse_parts(parts).map_err(usage)?;
    }
    let manifest = generate_manifest(&config).map_err(|e| usage(anyhow!(e)))?;
    let path = a.out_dir.join("manifest.json");
    write_json(&path, &manifest)?;
    let tables = manifest.base_table_ids().count();
    let items = manifest.items.len();
    summary(
        format!("tables={tables} items={items}"),
        json!({"tables": tables, "items": items, "manifest": path}),
    )
}

fn cmd_render(a: &RenderArgs, summary: &mut Summary) -> CmdResult {
    let mut manifest = load_manifest(&a.manifest)?;
    let style: StyleSpec = match &a.style {
        Some(p) => read_config(p).map_err(usage)?,
        None => StyleSpec::default(),
    };
    style.validate().map_err(|e| usage(e.into()))?;
    let base = manifest_dir(&a.manifest.manifest);
    let out_dir = a.out_dir.clone().unwrap_or_else(|| base.join("images"));
    let filter = a.filter.clone().unwrap_or_default();
    let options = RenderOptions {
        force: a.force,
        ref_base: Some(base),
    };
    let report = render_manifest(&mut manifest, &style, &out_dir, &filter, &options)?;
    write_json(&a.manifest.manifest, &manifest)?;
    for (id, e) in &report.failed {
        eprintln!("render {id}: {e}");
    }
    summary(
        format!("written={} skipped={} failed={}", report.written, report.skipped, report.failed.len()),
        json!({"written": report.written, "skipped": report.skipped, "failed": report.failed.len()}),
    )?;
    if !report.is_complete() {
        return Err(anyhow!("{} images failed to render", report.failed.len()).into());
    }
    Ok(())
}

fn cmd_query(a: &QueryArgs, summary: &mut Summary) -> CmdResult {
    let manifest = load_manifest(&a.manifest)?;
    let config = EndpointConfig::load(&a.endpoint).map_err(usage)?;
    let client = Client::from_config(config).map_err(usage)?;
    let filter = a.filter.clone().unwrap_or_default();
    let items: Vec<_> = manifest.items.iter().filter(|i| filter.matches(i)).collect();
    let store = PredictionStore::open(&a.predictions)?;
    eprintln!("querying {} items with {} ({})", items.len(), client.model(), a.variant.as_str());
    let s = run_batch(&client, &items, a.variant, &manifest_dir(&a.manifest.manifest), &store)?;
    summary(
        format!("succeeded={} failed={} skipped={}", s.succeeded, s.failed, s.skipped),
        serde_json::to_value(s).map_err(anyhow::Error::from)?,
    )?;
    if s.failed > 0 {
        return Err(anyhow!("{} items failed; rerun to retry them", s.failed).into());
    }
    Ok(())
}

/// Lenient shape of third-party dumps.
#[derive(Debug, Deserialize)]
struct ImportedLine {
    item_id: String,
    #[serde(alias = "output", alias = "text")]
    raw_text: String,
    model: Option<String>,
    prompt_variant: Option<String>,
    timestamp: Option<String>,
}

fn cmd_import(a: &ImportArgs, summary: &mut Summary) -> CmdResult {
    let manifest = load_manifest(&a.manifest)?;
    let filter = a.filter.clone().unwrap_or_default();
    let records: Vec<PredictionRecord> = if a.ground_truth {
        let model = a.model.clone().unwrap_or_else(|| "ground-truth".into());
        let timestamp = now_rfc3339();
        manifest
            .items
            .iter()
            .filter(|i| filter.matches(i))
            .map(|item| {
                let truth = manifest
                    .truth_for(item)
                    .ok_or_else(|| anyhow!("no ground truth table {} for item {}", item.table_id, item.id))?;
                Ok(PredictionRecord {
                    item_id: item.id.clone(),
                    model: model.clone(),
                    prompt_variant: a.variant,
                    raw_text: write_linearized(truth),
                    timestamp: timestamp.clone(),
                    attempts: 1,
                    error: None,
                    error_message: None,
                })
            })
            .collect::<Result<_>>()?
    } else {
        let input = a.input.as_ref().expect("clap requires --input");
        let lines: Vec<ImportedLine> = read_jsonl(input).map_err(usage)?;
        let items = index_items(&manifest);
        let mut records = Vec::with_capacity(lines.len());
        for (n, line) in lines.into_iter().enumerate() {
            let item = items
                .get(line.item_id.as_str())
                .ok_or_else(|| usage(anyhow!("{}:{}: unknown item {}", input.display(), n + 1, line.item_id)))?;
            if !filter.matches(item) {
                continue;
            }
            let model = line.model.or_else(|| a.model.clone()).ok_or_else(|| {
                usage(anyhow!("{}:{}: record has no model; pass --model", input.display(), n + 1))
            })?;
            let prompt_variant = match line.prompt_variant {
                Some(v) => parse_variant(&v).map_err(|e| usage(anyhow!("{}:{}: {e}", input.display(), n + 1)))?,
                None => a.variant,
            };
            records.push(PredictionRecord {
                item_id: line.item_id,
                model,
                prompt_variant,
                raw_text: line.raw_text,
                timestamp: line.timestamp.unwrap_or_else(now_rfc3339),
                attempts: 1,
                error: None,
                error_message: None,
            });
        }
        records
    };
    let store = PredictionStore::open(&a.predictions)?;
    let mut added = 0;
    for r in &records {
        if store.append(r)? {
            added += 1;
        }
    }
    let skipped = records.len() - added;
    summary(format!("imported={added} skipped={skipped}"), json!({"imported": added, "skipped": skipped}))
}

fn cmd_score(a: &ScoreArgs, summary: &mut Summary) -> CmdResult {
    let manifest = load_manifest(&a.manifest)?;
    let predictions = if a.predictions.exists() {
        load_successful(&a.predictions)?
    } else {
        return Err(usage(anyhow!("prediction file {} does not exist", a.predictions.display())));
    };
    let outcome = score_predictions(&manifest, &predictions)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    write_jsonl(&a.out, &outcome.rows)?;
    let csv = a.out.with_extension("csv");
    write_scores_csv(&csv, &outcome.rows)?;
    let mean = if outcome.rows.is_empty() {
        None
    } else {
        Some(100.0 * outcome.rows.iter().map(|r| r.record.rms_tbe_f1).sum::<f64>() / outcome.rows.len() as f64)
    };
    summary(
        format!(
            "scored={} parse_failures={} mean_rms_tbe_f1={}",
            outcome.rows.len(),
            outcome.parse_failures(),
            mean.map_or("n/a".into(), |m| format!("{m:.2}"))
        ),
        json!({
            "scored": outcome.rows.len(),
            "parse_failures": outcome.parse_failures(),
            "skipped_failed_calls": outcome.skipped_failed_calls,
            "mean_rms_tbe_f1": mean,
            "scores": a.out,
            "csv": csv,
        }),
    )
}

fn cmd_analyze(a: &AnalyzeArgs, summary: &mut Summary) -> CmdResult {
    let manifest = load_manifest(&a.manifest)?;
    let rows: Vec<ScoreRow> = read_jsonl(&a.scores).map_err(usage)?;
    if rows.is_empty() {
        return Err(anyhow!("{} holds no scores", a.scores.display()).into());
    }
    let report = analyze(&manifest, &rows)?;
    write_json(&a.out, &report)?;
    let mut text = Vec::new();
    for run in &report.models {
        for c in &run.comparisons {
            text.push(format!(
                "{} {}: {} vs {} on {}: p={:.4} {}",
                run.model,
                run.prompt_variant.as_str(),
                c.base.as_str(),
                c.other.as_str(),
                c.metric.as_str(),
                c.test.p_value,
                c.test.direction.as_str()
            ));
        }
        for s in &run.skipped_comparisons {
            eprintln!("skipped comparison: {s}");
        }
    }
    text.push(format!("runs={} analysis={}", report.models.len(), a.out.display()));
    summary(text.join("\n"), serde_json::to_value(&report).map_err(anyhow::Error::from)?)
}

fn cmd_report(a: &ReportArgs, summary: &mut Summary) -> CmdResult {
    let report: AnalysisReport = read_json(&a.analysis).map_err(usage)?;
    let written = emit_report(&report, &a.out_dir)?;
    summary(
        format!("files={} out_dir={}", written.len(), a.out_dir.display()),
        json!({"files": written}),
    )
}

fn cmd_verify(a: &VerifyArgs, summary: &mut Summary) -> CmdResult {
    let checks = verify::checks();
    if let Some(bad) = a.only.iter().find(|id| !checks.iter().any(|c| c.id == **id)) {
        return Err(usage(anyhow!("no check with id {bad}")));
    }
    if a.list {
        let text = checks.iter().map(|c| format!("{:>2} {:<20} {}", c.id, c.name, c.summary)).collect::<Vec<_>>();
        let value = checks.iter().map(|c| json!({"id": c.id, "name": c.name, "summary": c.summary})).collect();
        return summary(text.join("\n"), serde_json::Value::Array(value));
    }
    let outcomes = verify::run(&a.only);
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| format!("{} {}", o.id, o.name)).collect();
    let text = outcomes.iter().map(|o| o.line()).collect::<Vec<_>>().join("\n");
    let value = outcomes
        .iter()
        .map(|o| json!({"id": o.id, "name": o.name, "passed": o.passed, "detail": o.detail, "seconds": o.elapsed.as_secs_f64()}))
        .collect();
    summary(text, serde_json::Value::Array(value))?;
    if !failed.is_empty() {
        return Err(anyhow!("failing checks: {}", failed.join(", ")).into());
    }
    Ok(())
}
