//! Backing store behind the gateway: point catalog, measured history and
//! the forecast cache. With a data directory every change is appended to
//! a log and replayed on open.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use super::cache::{CacheEntry, ForecastCache, WriteOutcome};
use crate::error::{Error, Result};
use crate::synthetic::Dataset;
use crate::time::{format_ts, is_hour_boundary, HOUR};
use crate::timeseries::{IntervalSeries, PointId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    /// Measured interval data, read-only over HTTP.
    His,
    /// Target of forecast writes.
    Forecast,
}

fn hour() -> i64 {
    HOUR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointInfo {
    pub id: PointId,
    pub kind: PointKind,
    pub unit: String,
    #[serde(default = "hour")]
    pub resolution_s: i64,
}

/// Id of the forecast point paired with a load point.
pub fn forecast_point_id(load: &PointId) -> PointId {
    PointId::new(format!("{load}-forecast")).expect("non-empty")
}

#[derive(Debug, Clone, PartialEq)]
pub enum HisRows {
    History(Vec<(i64, f64)>),
    Forecast(Vec<(i64, CacheEntry)>),
}

impl HisRows {
    pub fn len(&self) -> usize {
        match self {
            HisRows::History(v) => v.len(),
            HisRows::Forecast(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Default)]
struct State {
    points: BTreeMap<PointId, PointInfo>,
    history: HashMap<PointId, BTreeMap<i64, f64>>,
    cache: ForecastCache,
}

#[derive(Serialize, Deserialize)]
struct HistoryLine {
    point: PointId,
    items: Vec<(i64, f64)>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ForecastLine {
    point: PointId,
    issued_at: i64,
    model_version: u64,
    items: Vec<(i64, f64)>,
}

const POINTS: &str = "points.json";
const HISTORY: &str = "history.jsonl";
const FORECASTS: &str = "forecast.jsonl";

pub struct Store {
    dir: Option<PathBuf>,
    state: RwLock<State>,
    fault: AtomicBool,
}

fn storage(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Storage(format!("{}: {e}", path.display()))
}

/// Reads a JSON-lines log. A torn final line (crash during append) is
/// skipped; a bad line anywhere else is an error.
fn read_log<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(storage(path, e)),
    };
    let lines: Vec<String> = BufReader::new(f)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| storage(path, e))?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            Err(_) if i + 1 == lines.len() => {
                log::warn!("{}: ignoring torn final line", path.display());
            }
            Err(e) => return Err(storage(path, format!("line {}: {e}", i + 1))),
        }
    }
    Ok(out)
}

impl Store {
    pub fn in_memory() -> Self {
        Store { dir: None, state: RwLock::new(State::default()), fault: AtomicBool::new(false) }
    }

    /// Opens (or creates) a persistent store and replays its logs.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| storage(&dir, e))?;
        let mut state = State::default();
        let points_path = dir.join(POINTS);
        match fs::read(&points_path) {
            Ok(bytes) => {
                let list: Vec<PointInfo> = serde_json::from_slice(&bytes).map_err(|e| storage(&points_path, e))?;
                state.points = list.into_iter().map(|p| (p.id.clone(), p)).collect();
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(storage(&points_path, e)),
        }
        for line in read_log::<HistoryLine>(&dir.join(HISTORY))? {
            state.history.entry(line.point).or_default().extend(line.items);
        }
        for line in read_log::<ForecastLine>(&dir.join(FORECASTS))? {
            state.cache.upsert(&line.point, &line.items, line.issued_at, line.model_version);
        }
        Ok(Store { dir: Some(dir), state: RwLock::new(state), fault: AtomicBool::new(false) })
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// While set, every operation fails with a storage error.
    pub fn set_fault(&self, on: bool) {
        self.fault.store(on, Ordering::SeqCst);
    }

    fn check_fault(&self) -> Result<()> {
        if self.fault.load(Ordering::SeqCst) {
            return Err(Error::Storage("backing store unavailable".into()));
        }
        Ok(())
    }

    fn append(&self, file: &str, line: &impl Serialize) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(file);
        let mut text = serde_json::to_string(line)?;
        text.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| storage(&path, e))?;
        f.write_all(text.as_bytes()).map_err(|e| storage(&path, e))?;
        f.sync_data().map_err(|e| storage(&path, e))
    }

    fn save_points(&self, points: &BTreeMap<PointId, PointInfo>) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let list: Vec<&PointInfo> = points.values().collect();
        let tmp = dir.join(".points.json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(&list)?).map_err(|e| storage(&tmp, e))?;
        fs::rename(&tmp, dir.join(POINTS)).map_err(|e| storage(&tmp, e))
    }

    /// Adds a point to the catalog. Re-registering an identical point is a
    /// no-op; changing an existing point is rejected.
    pub fn register(&self, info: PointInfo) -> Result<()> {
        self.check_fault()?;
        let mut st = self.state.write().unwrap();
        match st.points.get(&info.id) {
            Some(old) if *old == info => return Ok(()),
            Some(old) => {
                return Err(Error::invalid(format!(
                    "point {} already registered as {:?} [{}]",
                    old.id, old.kind, old.unit
                )))
            }
            None => {}
        }
        st.points.insert(info.id.clone(), info);
        self.save_points(&st.points)
    }

    pub fn points(&self) -> Result<Vec<PointInfo>> {
        self.check_fault()?;
        Ok(self.state.read().unwrap().points.values().cloned().collect())
    }

    pub fn point(&self, id: &PointId) -> Result<PointInfo> {
        self.check_fault()?;
        self.state
            .read()
            .unwrap()
            .points
            .get(id)
            .cloned()
            .ok_or_else(|| Error::not_found(format!("unknown point `{id}`")))
    }

    /// Registers `series` as a history point and stores its present values.
    pub fn import_series(&self, series: &IntervalSeries) -> Result<usize> {
        self.register(PointInfo {
            id: series.point().clone(),
            kind: PointKind::His,
            unit: series.unit().to_string(),
            resolution_s: series.resolution_s(),
        })?;
        let items: Vec<(i64, f64)> = series.samples().iter().filter_map(|s| s.value.map(|v| (s.ts, v))).collect();
        self.append_history(series.point(), &items)?;
        Ok(items.len())
    }

    pub fn append_history(&self, id: &PointId, items: &[(i64, f64)]) -> Result<()> {
        self.check_fault()?;
        let mut st = self.state.write().unwrap();
        match st.points.get(id) {
            Some(p) if p.kind == PointKind::His => {}
            Some(_) => return Err(Error::invalid(format!("`{id}` is not a history point"))),
            None => return Err(Error::not_found(format!("unknown point `{id}`"))),
        }
        if let Some((ts, _)) = items.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at {}", format_ts(*ts))));
        }
        self.append(HISTORY, &HistoryLine { point: id.clone(), items: items.to_vec() })?;
        st.history.entry(id.clone()).or_default().extend(items.iter().copied());
        Ok(())
    }

    /// Load, weather and a paired forecast point for each dataset series.
    /// Returns the forecast point's id.
    pub fn import_dataset(&self, ds: &Dataset) -> Result<PointId> {
        for s in ds.all_series() {
            self.import_series(s)?;
        }
        let fid = forecast_point_id(ds.load.point());
        self.register(PointInfo {
            id: fid.clone(),
            kind: PointKind::Forecast,
            unit: ds.load.unit().to_string(),
            resolution_s: HOUR,
        })?;
        Ok(fid)
    }

    /// Values with `start <= ts < end`. Forecast points return effective
    /// cache entries.
    pub fn his_read(&self, id: &PointId, start: i64, end: i64) -> Result<(PointInfo, HisRows)> {
        self.check_fault()?;
        if start > end {
            return Err(Error::invalid(format!("range start {} is after end {}", format_ts(start), format_ts(end))));
        }
        let st = self.state.read().unwrap();
        let info = st
            .points
            .get(id)
            .cloned()
            .ok_or_else(|| Error::not_found(format!("unknown point `{id}`")))?;
        let rows = match info.kind {
            PointKind::His => HisRows::History(
                st.history
                    .get(id)
                    .map(|m| m.range(start..end).map(|(t, v)| (*t, *v)).collect())
                    .unwrap_or_default(),
            ),
            PointKind::Forecast => HisRows::Forecast(st.cache.range(id, start, end)),
        };
        Ok((info, rows))
    }

    /// Upserts one issuance into the forecast cache.
    pub fn his_write(&self, id: &PointId, items: &[(i64, f64)], issued_at: i64, model_version: u64) -> Result<WriteOutcome> {
        self.check_fault()?;
        for (ts, v) in items {
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite value at {}", format_ts(*ts))));
            }
            if !is_hour_boundary(*ts) {
                return Err(Error::invalid(format!("{} is not on an hour boundary", format_ts(*ts))));
            }
        }
        let mut st = self.state.write().unwrap();
        match st.points.get(id) {
            Some(p) if p.kind == PointKind::Forecast => {}
            Some(_) => return Err(Error::invalid(format!("`{id}` is not a forecast point"))),
            None => return Err(Error::not_found(format!("unknown point `{id}`"))),
        }
        self.append(
            FORECASTS,
            &ForecastLine { point: id.clone(), issued_at, model_version, items: items.to_vec() },
        )?;
        Ok(st.cache.upsert(id, items, issued_at, model_version))
    }

    /// The effective values for the 18 hours after the latest issuance.
    pub fn latest_forecast(&self, id: &PointId) -> Result<(Option<i64>, Vec<(i64, CacheEntry)>)> {
        let info = self.point(id)?;
        if info.kind != PointKind::Forecast {
            return Err(Error::invalid(format!("`{id}` is not a forecast point")));
        }
        let st = self.state.read().unwrap();
        match st.cache.latest_issue(id) {
            None => Ok((None, Vec::new())),
            Some(at) => Ok((Some(at), st.cache.range(id, at + HOUR, at + 19 * HOUR))),
        }
    }
}
