//! The operational loop: pull inputs, screen them, retrain and forecast
//! whatever the schedule says is due.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::runlog::{Outcome, RecordKind, RunLog, RunRecord};
use super::schedule::{tick, ActionKind, Clock, PointBinding, ScheduleConfig, ScheduleState};
use crate::error::{Error, Result};
use crate::gateway::GatewayClient;
use crate::lstm::TrainConfig;
use crate::pipeline::{self, PipelineConfig};
use crate::quality::{impute_missing, sigma_filter, QcPolicy, QcReport, QcWindow};
use crate::registry::Registry;
use crate::time::{floor_hour, HOUR};
use crate::timeseries::{align, resample_hourly, AlignedTable, IntervalSeries, PointId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuntimeConfig {
    pub schedule: ScheduleConfig,
    /// Used for cold-start training and as the base for retrains.
    pub train: TrainConfig,
    pub pipeline: PipelineConfig,
    /// Epochs for a warm-started retrain.
    pub retrain_epochs: usize,
    /// Continue from the latest stored weights instead of a fresh init.
    pub warm_start: bool,
    pub impute_max_gap_hours: u32,
    /// Earliest history a retrain reads; unset means everything available.
    #[serde(with = "crate::time::iso::option", skip_serializing_if = "Option::is_none")]
    pub history_start: Option<i64>,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            schedule: ScheduleConfig::default(),
            train: TrainConfig::default(),
            pipeline: PipelineConfig::default(),
            retrain_epochs: 50,
            warm_start: true,
            impute_max_gap_hours: 6,
            history_start: None,
        }
    }
}

impl RuntimeConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.train.validate()?;
        if self.retrain_epochs == 0 {
            return Err(Error::invalid("retrain_epochs must be >= 1"));
        }
        Ok(())
    }

    /// Hours of history a forecast-only step fetches.
    fn forecast_span_hours(&self) -> i64 {
        let qc = match self.schedule.qc_policy.window {
            QcWindow::Rolling { hours } => hours as i64,
            QcWindow::Global => 0,
        };
        qc + self.train.lookback as i64 + self.impute_max_gap_hours as i64 + 1
    }
}

/// Stage at which [`Runtime::inject_fault`] makes a point fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultStage {
    Fetch,
    Qc,
    Retrain,
    Forecast,
}

pub struct Runtime {
    cfg: RuntimeConfig,
    clock: Arc<dyn Clock>,
    client: GatewayClient,
    registry: Registry,
    log: RunLog,
    state: ScheduleState,
    retrain_failures: BTreeMap<PointId, u32>,
    faults: BTreeMap<PointId, FaultStage>,
}

/// Consecutive retrain failures that raise an alert record.
pub const ALERT_AFTER: u32 = 3;

impl Runtime {
    /// The retrain schedule resumes from the newest model in the registry.
    pub fn new(cfg: RuntimeConfig, clock: Arc<dyn Clock>, client: GatewayClient, registry: Registry, log: RunLog) -> Result<Self> {
        cfg.validate()?;
        let mut state = ScheduleState::default();
        let now = clock.now();
        for b in &cfg.schedule.points {
            match registry.get_latest(&b.load) {
                // A model stamped after `now` (simulated clocks) counts as fresh.
                Ok(r) => state.record(&b.load, ActionKind::Retrain, r.created_at.min(now)),
                Err(e) if e.is_not_found() => {}
                Err(e) => log::warn!("{}: latest model unreadable, retraining at first tick: {e}", b.load),
            }
        }
        Ok(Runtime { cfg, clock, client, registry, log, state, retrain_failures: BTreeMap::new(), faults: BTreeMap::new() })
    }

    pub fn log(&self) -> &RunLog {
        &self.log
    }

    pub fn state(&self) -> &ScheduleState {
        &self.state
    }

    pub fn config(&self) -> &RuntimeConfig {
        &self.cfg
    }

    /// Test hook: every action for `point` fails at `stage`.
    pub fn inject_fault(&mut self, point: &PointId, stage: FaultStage) {
        self.faults.insert(point.clone(), stage);
    }

    pub fn clear_faults(&mut self) {
        self.faults.clear();
    }

    fn fault(&self, point: &PointId, stage: FaultStage) -> Result<()> {
        if self.faults.get(point) == Some(&stage) {
            return Err(Error::Storage(format!("injected {stage:?} fault")));
        }
        Ok(())
    }

    /// Runs everything due at the clock's current time and returns the
    /// records written. Action failures are recorded, not returned.
    pub fn step(&mut self) -> Result<Vec<RunRecord>> {
        let now = self.clock.now();
        let actions = tick(now, &self.state, &self.cfg.schedule);
        let before = self.log.records().len();
        let bindings = self.cfg.schedule.points.clone();
        for b in &bindings {
            let due: Vec<ActionKind> = actions.iter().filter(|a| a.point == b.load).map(|a| a.kind).collect();
            if !due.is_empty() {
                self.run_point(now, b, &due)?;
            }
        }
        Ok(self.log.records()[before..].to_vec())
    }

    /// Steps until `stop` is set, sleeping `poll` on the clock between steps.
    pub fn run_loop(&mut self, stop: &AtomicBool, poll: Duration) -> Result<()> {
        while !stop.load(Ordering::SeqCst) {
            self.step()?;
            self.clock.sleep(poll);
        }
        Ok(())
    }

    /// Steps while the clock is before `end`.
    pub fn run_until(&mut self, end: i64, poll: Duration) -> Result<()> {
        while self.clock.now() < end {
            self.step()?;
            self.clock.sleep(poll);
        }
        Ok(())
    }

    fn record(&mut self, now: i64, action: RecordKind, point: &PointId, res: std::result::Result<(Option<u64>, String), String>, t0: Instant) -> Result<()> {
        let (outcome, model_version, detail) = match res {
            Ok((v, d)) => (Outcome::Ok, v, d),
            Err(e) => (Outcome::Failed, None, e),
        };
        self.log.append(RunRecord {
            ts: now,
            action,
            point: point.clone(),
            outcome,
            duration_ms: t0.elapsed().as_millis() as u64,
            model_version,
            detail,
        })
    }

    fn run_point(&mut self, now: i64, b: &PointBinding, due: &[ActionKind]) -> Result<()> {
        let t0 = Instant::now();
        let retrain = due.contains(&ActionKind::Retrain);
        let issued_at = floor_hour(now);
        let start = if retrain {
            self.cfg.history_start.unwrap_or(0)
        } else {
            issued_at - self.cfg.forecast_span_hours() * HOUR
        };
        let table = match self.inputs(b, start, issued_at + HOUR) {
            Ok((table, qc_detail)) => {
                self.record(now, RecordKind::Qc, &b.load, Ok((None, qc_detail)), t0)?;
                table
            }
            Err((stage, e)) => {
                let msg = e.to_string();
                if stage == FaultStage::Qc {
                    self.record(now, RecordKind::Qc, &b.load, Err(msg.clone()), t0)?;
                }
                for kind in due {
                    self.record(now, kind_record(*kind), &b.load, Err(format!("inputs unavailable: {msg}")), t0)?;
                    if *kind == ActionKind::Retrain {
                        self.retrain_failed(now, &b.load)?;
                    }
                }
                return Ok(());
            }
        };
        for kind in due {
            let t0 = Instant::now();
            match kind {
                ActionKind::Retrain => {
                    let res = self.retrain(now, &b.load, &table);
                    let ok = res.is_ok();
                    self.record(now, RecordKind::Retrain, &b.load, res.map_err(|e| e.to_string()), t0)?;
                    if ok {
                        self.state.record(&b.load, ActionKind::Retrain, now);
                        self.retrain_failures.remove(&b.load);
                    } else {
                        self.retrain_failed(now, &b.load)?;
                    }
                }
                ActionKind::Forecast => {
                    let res = self.forecast(b, issued_at, &table);
                    let ok = res.is_ok();
                    self.record(now, RecordKind::Forecast, &b.load, res.map_err(|e| e.to_string()), t0)?;
                    if ok {
                        self.state.record(&b.load, ActionKind::Forecast, now);
                    }
                }
            }
        }
        Ok(())
    }

    fn retrain_failed(&mut self, now: i64, point: &PointId) -> Result<()> {
        let n = self.retrain_failures.entry(point.clone()).or_default();
        *n += 1;
        if *n == ALERT_AFTER {
            let msg = format!("{ALERT_AFTER} consecutive retrain failures");
            self.record(now, RecordKind::Alert, point, Err(msg), Instant::now())?;
        }
        Ok(())
    }

    /// Fetch, screen, fill and align the seven input streams.
    fn inputs(&self, b: &PointBinding, start: i64, end: i64) -> std::result::Result<(AlignedTable, String), (FaultStage, Error)> {
        self.fault(&b.load, FaultStage::Fetch).map_err(|e| (FaultStage::Fetch, e))?;
        let mut raw = Vec::with_capacity(7);
        for id in std::iter::once(&b.load).chain(&b.weather) {
            raw.push(self.client.fetch_history(id, start, end).map_err(|e| (FaultStage::Fetch, e))?);
        }
        let clean = || {
            self.fault(&b.load, FaultStage::Qc)?;
            clean_and_align(&raw[0], &raw[1..], &self.cfg.schedule.qc_policy, self.cfg.impute_max_gap_hours)
        };
        let (table, reports) = clean().map_err(|e| (FaultStage::Qc, e))?;
        let removed: usize = reports.iter().map(|r| r.removed).sum();
        let examined: usize = reports.iter().map(|r| r.examined).sum();
        let detail = format!("removed {removed} of {examined} samples");
        Ok((table, detail))
    }

    fn retrain(&self, now: i64, point: &PointId, table: &AlignedTable) -> Result<(Option<u64>, String)> {
        self.fault(point, FaultStage::Retrain)?;
        let warm = if self.cfg.warm_start {
            match self.registry.get_latest(point) {
                Ok(r) => Some(r),
                Err(e) if e.is_not_found() => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let mut cfg = self.cfg.train.clone();
        if warm.is_some() {
            cfg.epochs = self.cfg.retrain_epochs;
        }
        let (record, _) = pipeline::train_point_model(point, table, &cfg, &self.cfg.pipeline, now, warm.as_ref())?;
        let mse = record.metrics.overall_mse;
        let v = self.registry.put(&record)?;
        let how = if warm.is_some() { "warm" } else { "cold" };
        Ok((Some(v), format!("{how} start, {} rows, test mse {mse:.3}", table.len())))
    }

    fn forecast(&self, b: &PointBinding, issued_at: i64, table: &AlignedTable) -> Result<(Option<u64>, String)> {
        self.fault(&b.load, FaultStage::Forecast)?;
        let record = self.registry.get_latest(&b.load)?;
        let rows = pipeline::latest_rows(table, issued_at, record.train_config.lookback)?;
        let grid = pipeline::issue_forecast(&record, rows, issued_at)?;
        let out = self.client.his_write(&b.forecast_point(), &grid)?;
        Ok((Some(grid.model_version), format!("accepted {} stale {}", out.accepted, out.stale)))
    }
}

/// Screens each stream with the sigma rule, fills short gaps and joins
/// the load with its weather inputs.
pub fn clean_and_align(
    load: &IntervalSeries,
    weather: &[IntervalSeries],
    policy: &QcPolicy,
    max_gap_hours: u32,
) -> Result<(AlignedTable, Vec<QcReport>)> {
    let mut clean = Vec::with_capacity(1 + weather.len());
    let mut reports = Vec::with_capacity(1 + weather.len());
    for s in std::iter::once(load).chain(weather) {
        let (screened, report) = sigma_filter(&resample_hourly(s)?, policy)?;
        clean.push(impute_missing(&screened, max_gap_hours));
        reports.push(report);
    }
    Ok((align(&clean[0], &clean[1..])?, reports))
}

fn kind_record(k: ActionKind) -> RecordKind {
    match k {
        ActionKind::Retrain => RecordKind::Retrain,
        ActionKind::Forecast => RecordKind::Forecast,
    }
}
