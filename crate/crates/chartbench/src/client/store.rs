use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{Context, Result};
use chartbench_core::prompt::PromptVariant;

use crate::io::PredictionRecord;

type Key = (String, String, PromptVariant);

/// Append-only JSON Lines store of prediction records.
///
/// Each record is serialized to one line and written with a single
/// `write_all` under a lock, so concurrent appends never interleave. A
/// (item, model, variant) key counts as done once a successful record
/// exists; failed attempts are kept for diagnostics and retried on rerun.
pub struct PredictionStore {
    path: PathBuf,
    done: Mutex<HashSet<Key>>,
    file: Mutex<File>,
}

impl PredictionStore {
    /// Opens or creates the store. A malformed line aborts with its line
    /// number rather than silently dropping data.
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut done = HashSet::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: PredictionRecord = serde_json::from_str(&line)
                    .with_context(|| format!("{}:{}: corrupt prediction record", path.display(), n + 1))?;
                if record.succeeded() {
                    done.insert(record.key());
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        Ok(Self {
            path: path.to_path_buf(),
            done: Mutex::new(done),
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn contains(&self, item_id: &str, model: &str, variant: PromptVariant) -> bool {
        self.done
            .lock()
            .unwrap()
            .contains(&(item_id.to_string(), model.to_string(), variant))
    }

    /// Appends `record`. Returns `false` without writing if a successful
    /// record for the same key is already stored.
    pub fn append(&self, record: &PredictionRecord) -> Result<bool> {
        let mut done = self.done.lock().unwrap();
        if done.contains(&record.key()) {
            return Ok(false);
        }
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        let mut file = self.file.lock().unwrap();
        file.write_all(&line)?;
        file.flush()?;
        if record.succeeded() {
            done.insert(record.key());
        }
        Ok(true)
    }

    pub fn completed(&self) -> usize {
        self.done.lock().unwrap().len()
    }
}

/// Successful records of a store file, keeping the last one per key.
pub fn load_successful(path: &Path) -> Result<Vec<PredictionRecord>> {
    let all: Vec<PredictionRecord> = crate::io::read_jsonl(path)?;
    let mut seen = HashSet::new();
    let mut out: Vec<PredictionRecord> = all.into_iter().rev().filter(|r| r.succeeded() && seen.insert(r.key())).collect();
    out.reverse();
    Ok(out)
}
