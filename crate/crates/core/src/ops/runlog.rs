//! Append-only JSON-lines audit log of executed actions.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::PointId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Qc,
    Retrain,
    Forecast,
    /// Operator attention needed, e.g. repeated retrain failures.
    Alert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Scheduler time of the action, epoch seconds.
    pub ts: i64,
    pub action: RecordKind,
    pub point: PointId,
    pub outcome: Outcome,
    pub duration_ms: u64,
    /// Version produced (retrain) or used (forecast).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_version: Option<u64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Default)]
pub struct RunLog {
    path: Option<PathBuf>,
    records: Vec<RunRecord>,
}

impl RunLog {
    pub fn in_memory() -> Self {
        RunLog::default()
    }

    /// Appends to `path`, keeping any records already there.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let records = if path.exists() { Self::read(&path)? } else { Vec::new() };
        Ok(RunLog { path: Some(path), records })
    }

    pub fn read(path: &Path) -> Result<Vec<RunRecord>> {
        let f = File::open(path).map_err(|e| Error::Storage(format!("{}: {e}", path.display())))?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(
                serde_json::from_str(&line)
                    .map_err(|e| Error::invalid(format!("{} line {}: {e}", path.display(), i + 1)))?,
            );
        }
        Ok(out)
    }

    pub fn append(&mut self, r: RunRecord) -> Result<()> {
        if let Some(path) = &self.path {
            let mut line = serde_json::to_string(&r)?;
            line.push('\n');
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .and_then(|mut f| f.write_all(line.as_bytes()))
                .map_err(|e| Error::Storage(format!("{}: {e}", path.display())))?;
        }
        match r.outcome {
            Outcome::Ok => log::info!("{:?} {} ok {}", r.action, r.point, r.detail),
            Outcome::Failed => log::warn!("{:?} {} failed: {}", r.action, r.point, r.detail),
        }
        self.records.push(r);
        Ok(())
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn count(&self, action: RecordKind, outcome: Outcome) -> usize {
        self.records.iter().filter(|r| r.action == action && r.outcome == outcome).count()
    }
}

/// Model versions produced by successful retrains, per point, in log order.
pub fn replay_versions(records: &[RunRecord]) -> BTreeMap<PointId, Vec<u64>> {
    let mut out: BTreeMap<PointId, Vec<u64>> = BTreeMap::new();
    for r in records {
        if let (RecordKind::Retrain, Outcome::Ok, Some(v)) = (r.action, r.outcome, r.model_version) {
            out.entry(r.point.clone()).or_default().push(v);
        }
    }
    out
}
