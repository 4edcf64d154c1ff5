//! On-disk formats: manifest JSON, prediction and score JSON Lines, score CSV.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use chartbench_core::generate::{Manifest, SCHEMA_VERSION};
use chartbench_core::metrics::ScoreRecord;
use chartbench_core::parse::Dialect;
use chartbench_core::prompt::PromptVariant;
use chartbench_core::stats::Metric;
use chartbench_core::BenchmarkItem;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Writes `bytes` to a sibling temp file and renames it into place, so
/// readers never observe a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

/// JSON or TOML by file extension.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).with_context(|| format!("parsing {}", path.display())),
        _ => serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())),
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let manifest: Manifest = read_json(path)?;
    if manifest.schema_version != SCHEMA_VERSION {
        bail!(
            "{}: unsupported schema_version {} (expected {SCHEMA_VERSION})",
            path.display(),
            manifest.schema_version
        );
    }
    Ok(manifest)
}

/// Items by id.
pub fn index_items(manifest: &Manifest) -> HashMap<&str, &BenchmarkItem> {
    manifest.items.iter().map(|i| (i.id.as_str(), i)).collect()
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}: malformed record", path.display(), n + 1))?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, values: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for v in values {
        serde_json::to_writer(&mut buf, v)?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

/// Why a model call produced no usable text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Auth,
    Quota,
    Timeout,
    Server,
    Client,
    Transport,
    BadResponse,
    MissingInput,
}

/// One model output for one item, stored verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub item_id: String,
    pub model: String,
    pub prompt_variant: PromptVariant,
    pub raw_text: String,
    /// RFC 3339.
    pub timestamp: String,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<FailureKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_message: Option<String>,
}

fn one() -> u32 {
    1
}

fn is_one(v: &u32) -> bool {
    *v == 1
}

impl PredictionRecord {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }

    pub fn key(&self) -> (String, String, PromptVariant) {
        (self.item_id.clone(), self.model.clone(), self.prompt_variant)
    }
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// A score for one (item, model, prompt variant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub schema_version: u32,
    pub item_id: String,
    pub model: String,
    pub prompt_variant: PromptVariant,
    /// The output could not be read as a table and was scored as empty.
    pub parse_failed: bool,
    pub dialect: Dialect,
    pub unparsed_cells: usize,
    pub record: ScoreRecord,
}

const RECORD_COLUMNS: [&str; 12] = [
    "rms_f1",
    "rms_f1_no_header",
    "rms_tbe_f1",
    "rms_tbe_f1_sig",
    "tbe_raw",
    "rnss_tbe_f1",
    "ses",
    "n_sig_cells",
    "t_used",
    "matched",
    "unmatched_truth",
    "unmatched_pred",
];

/// Score CSV: identification columns, every score field, then each bounded
/// metric as a percentage (`<metric>_pct`).
pub fn write_scores_csv(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut buf = BufWriter::new(Vec::new());
    let mut header: Vec<String> = ["item_id", "model", "prompt_variant", "parse_failed", "dialect", "unparsed_cells"]
        .map(String::from)
        .to_vec();
    header.extend(RECORD_COLUMNS.map(String::from));
    header.extend(Metric::ALL.iter().filter(|m| m.is_bounded()).map(|m| format!("{}_pct", m.as_str())));
    writeln!(buf, "{}", header.join(","))?;
    for row in rows {
        let r = &row.record;
        let mut fields = vec![
            csv_field(&row.item_id),
            csv_field(&row.model),
            row.prompt_variant.as_str().to_string(),
            row.parse_failed.to_string(),
            serde_json::to_value(row.dialect)?.as_str().unwrap_or_default().to_string(),
            row.unparsed_cells.to_string(),
        ];
        fields.extend(
            [r.rms_f1, r.rms_f1_no_header, r.rms_tbe_f1, r.rms_tbe_f1_sig, r.tbe_raw, r.rnss_tbe_f1, r.ses]
                .map(|v| v.to_string()),
        );
        fields.extend([r.n_sig_cells.to_string(), r.t_used.to_string()]);
        fields.extend([r.matched, r.unmatched_truth, r.unmatched_pred].map(|v| v.to_string()));
        fields.extend(
            Metric::ALL
                .iter()
                .filter(|m| m.is_bounded())
                .map(|m| m.reported(r).to_string()),
        );
        writeln!(buf, "{}", fields.join(","))?;
    }
    let bytes = buf.into_inner().map_err(|e| e.into_error())?;
    write_atomic(path, &bytes)
}

/// Quotes a CSV field when it contains a delimiter, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
