//! What is due when: the pure scheduling rule plus clocks.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicI64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::forecast_point_id;
use crate::quality::QcPolicy;
use crate::time::DAY;
use crate::timeseries::{PointId, WeatherField};

/// A load point and the series its model reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointBinding {
    pub load: PointId,
    /// Six weather points, in [`WeatherField::ALL`] order.
    pub weather: Vec<PointId>,
    /// Where forecasts are written; defaults to `<load>-forecast`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forecast: Option<PointId>,
}

impl PointBinding {
    pub fn forecast_point(&self) -> PointId {
        self.forecast.clone().unwrap_or_else(|| forecast_point_id(&self.load))
    }

    /// Load plus the default synthetic weather point names.
    pub fn synthetic(load: PointId) -> Self {
        let cfg = crate::synthetic::SyntheticConfig::default();
        PointBinding { load, weather: WeatherField::ALL.iter().map(|f| cfg.weather_point(*f)).collect(), forecast: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub forecast_cadence_s: i64,
    pub retrain_interval_days: u32,
    pub qc_policy: QcPolicy,
    pub points: Vec<PointBinding>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig { forecast_cadence_s: 3600, retrain_interval_days: 45, qc_policy: QcPolicy::default(), points: Vec::new() }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.forecast_cadence_s <= 0 {
            return Err(Error::invalid("forecast_cadence_s must be > 0"));
        }
        if self.retrain_interval_days < 1 {
            return Err(Error::invalid("retrain_interval_days must be >= 1"));
        }
        self.qc_policy.validate()?;
        for b in &self.points {
            if b.weather.len() != WeatherField::ALL.len() {
                return Err(Error::invalid(format!("point {} needs 6 weather points, has {}", b.load, b.weather.len())));
            }
        }
        Ok(())
    }

    pub fn retrain_interval_s(&self) -> i64 {
        self.retrain_interval_days as i64 * DAY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Retrain,
    Forecast,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub kind: ActionKind,
    pub point: PointId,
}

/// Last successful run per (point, action).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScheduleState {
    last: BTreeMap<(PointId, ActionKind), i64>,
}

impl ScheduleState {
    pub fn last_run(&self, point: &PointId, kind: ActionKind) -> Option<i64> {
        self.last.get(&(point.clone(), kind)).copied()
    }

    pub fn record(&mut self, point: &PointId, kind: ActionKind, at: i64) {
        self.last.insert((point.clone(), kind), at);
    }
}

/// Due actions at `now`: per point, a retrain when the interval has
/// elapsed and a forecast when the cadence has, retrain first. Points
/// never run are due for both.
pub fn tick(now: i64, state: &ScheduleState, cfg: &ScheduleConfig) -> Vec<Action> {
    let mut out = Vec::new();
    for b in &cfg.points {
        let due = |kind, every| state.last_run(&b.load, kind).is_none_or(|t| now - t >= every);
        if due(ActionKind::Retrain, cfg.retrain_interval_s()) {
            out.push(Action { kind: ActionKind::Retrain, point: b.load.clone() });
        }
        if due(ActionKind::Forecast, cfg.forecast_cadence_s) {
            out.push(Action { kind: ActionKind::Forecast, point: b.load.clone() });
        }
    }
    out
}

pub trait Clock: Send + Sync {
    /// UTC epoch seconds, never decreasing.
    fn now(&self) -> i64;

    /// Waits between scheduler polls.
    fn sleep(&self, d: std::time::Duration) {
        std::thread::sleep(d);
    }
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> i64 {
        chrono::Utc::now().timestamp()
    }
}

/// Clock advanced explicitly by the caller.
#[derive(Debug)]
pub struct SimClock(AtomicI64);

impl SimClock {
    pub fn new(start: i64) -> Self {
        SimClock(AtomicI64::new(start))
    }

    pub fn advance(&self, secs: i64) {
        assert!(secs >= 0, "simulated clock cannot go backwards");
        self.0.fetch_add(secs, Ordering::SeqCst);
    }
}

impl Clock for SimClock {
    fn now(&self) -> i64 {
        self.0.load(Ordering::SeqCst)
    }

    /// Advances instead of blocking.
    fn sleep(&self, d: std::time::Duration) {
        self.advance(d.as_secs() as i64);
    }
}
