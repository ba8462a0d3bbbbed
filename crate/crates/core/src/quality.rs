//! Sensor-stream quality control: sigma-rule outlier removal and
//! short-gap interpolation.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::HOUR;
use crate::timeseries::{IntervalSeries, PointId, Sample};

/// Which samples form the reference window for a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QcWindow {
    /// Every other present sample of the series.
    Global,
    /// The trailing `hours` before the candidate, `[t - hours*3600, t)`.
    Rolling { hours: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QcPolicy {
    pub sigma_threshold: f64,
    pub window: QcWindow,
    pub min_window_count: usize,
}

impl Default for QcPolicy {
    fn default() -> Self {
        QcPolicy {
            sigma_threshold: 3.0,
            window: QcWindow::Rolling { hours: 720 },
            min_window_count: 24,
        }
    }
}

impl QcPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_threshold > 0.0) {
            return Err(Error::invalid("sigma_threshold must be > 0"));
        }
        if self.min_window_count < 2 {
            return Err(Error::invalid("min_window_count must be >= 2"));
        }
        if let QcWindow::Rolling { hours } = self.window {
            if (hours as usize) < self.min_window_count {
                return Err(Error::invalid(format!(
                    "rolling window of {hours} h is shorter than min_window_count {}",
                    self.min_window_count
                )));
            }
        }
        Ok(())
    }
}

/// Reference statistics used to judge one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowStat {
    pub ts: i64,
    pub mean: f64,
    pub std: f64,
}

/// Audit record of one [`sigma_filter`] pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcReport {
    pub point: PointId,
    /// Present samples looked at.
    pub examined: usize,
    pub removed: usize,
    /// Samples passed through because their window was too small.
    pub unscreened: usize,
    pub removed_ts: Vec<i64>,
    pub window_stats: Vec<WindowStat>,
}

impl QcReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// One-line human summary used by the `qc` command.
    pub fn summary_line(&self) -> String {
        let pct = if self.examined == 0 {
            0.0
        } else {
            100.0 * self.removed as f64 / self.examined as f64
        };
        format!(
            "{:<28} {:>8} {:>8} {:>7.3}% {:>10}",
            self.point.as_str(),
            self.examined,
            self.removed,
            pct,
            self.unscreened
        )
    }
}

/// Running sums over a shifted origin to limit cancellation.
#[derive(Default)]
struct Moments {
    origin: f64,
    n: usize,
    sum: f64,
    sumsq: f64,
}

impl Moments {
    fn add(&mut self, v: f64) {
        if self.n == 0 {
            self.origin = v;
            self.sum = 0.0;
            self.sumsq = 0.0;
        }
        let d = v - self.origin;
        self.n += 1;
        self.sum += d;
        self.sumsq += d * d;
    }

    fn remove(&mut self, v: f64) {
        let d = v - self.origin;
        self.n -= 1;
        self.sum -= d;
        self.sumsq -= d * d;
    }

    /// Mean and sample standard deviation; `None` below two values.
    fn stats(&self) -> Option<(f64, f64)> {
        if self.n < 2 {
            return None;
        }
        let n = self.n as f64;
        let mean_d = self.sum / n;
        let var = ((self.sumsq - n * mean_d * mean_d) / (n - 1.0)).max(0.0);
        Some((self.origin + mean_d, var.sqrt()))
    }
}

/// Flags samples lying more than `sigma_threshold` standard deviations
/// from the mean of their window. The candidate itself is excluded from
/// its window's statistics. Flagged samples become missing; no timestamp is
/// dropped and surviving values are untouched.
///
/// A window with zero spread flags nothing. In rolling mode the window is
/// trailing and holds already-screened values, so a removed spike does not
/// widen later windows.
pub fn sigma_filter(series: &IntervalSeries, policy: &QcPolicy) -> Result<(IntervalSeries, QcReport)> {
    policy.validate()?;
    let mut report = QcReport {
        point: series.point().clone(),
        examined: 0,
        removed: 0,
        unscreened: 0,
        removed_ts: Vec::new(),
        window_stats: Vec::new(),
    };
    let mut out: Vec<Sample> = series.samples().to_vec();

    let mut judge = |idx: usize, stats: Option<(f64, f64)>, count: usize, report: &mut QcReport| -> bool {
        let s = out[idx];
        let v = s.value.expect("judged samples are present");
        report.examined += 1;
        match stats {
            Some((mean, std)) if count >= policy.min_window_count => {
                report.window_stats.push(WindowStat { ts: s.ts, mean, std });
                if std > 0.0 && (v - mean).abs() > policy.sigma_threshold * std {
                    out[idx].value = None;
                    report.removed += 1;
                    report.removed_ts.push(s.ts);
                    return true;
                }
                false
            }
            _ => {
                report.unscreened += 1;
                false
            }
        }
    };

    match policy.window {
        QcWindow::Global => {
            let mut all = Moments::default();
            for s in series.samples() {
                if let Some(v) = s.value {
                    all.add(v);
                }
            }
            for idx in 0..series.len() {
                let Some(v) = series.samples()[idx].value else { continue };
                all.remove(v);
                let stats = all.stats();
                let count = all.n;
                judge(idx, stats, count, &mut report);
                all.add(v);
            }
        }
        QcWindow::Rolling { hours } => {
            let span = hours as i64 * HOUR;
            let mut window: VecDeque<(i64, f64)> = VecDeque::new();
            let mut m = Moments::default();
            for idx in 0..series.len() {
                let s = series.samples()[idx];
                while let Some(&(ts, v)) = window.front() {
                    if ts < s.ts - span {
                        window.pop_front();
                        m.remove(v);
                    } else {
                        break;
                    }
                }
                let Some(v) = s.value else { continue };
                let flagged = judge(idx, m.stats(), m.n, &mut report);
                if !flagged {
                    window.push_back((s.ts, v));
                    m.add(v);
                }
            }
        }
    }

    let cleaned = series.with_samples(out)?;
    Ok((cleaned, report))
}

/// Fills runs of at most `max_gap_hours` missing samples by linear
/// interpolation between the bracketing present values. Longer runs and
/// leading/trailing gaps stay missing.
pub fn impute_missing(series: &IntervalSeries, max_gap_hours: u32) -> IntervalSeries {
    let mut out = series.samples().to_vec();
    let mut prev: Option<usize> = None;
    for idx in 0..out.len() {
        if out[idx].value.is_none() {
            continue;
        }
        if let Some(p) = prev {
            let gap = idx - p - 1;
            if gap > 0 && gap <= max_gap_hours as usize {
                let (t0, v0) = (out[p].ts as f64, out[p].value.unwrap());
                let (t1, v1) = (out[idx].ts as f64, out[idx].value.unwrap());
                for slot in &mut out[p + 1..idx] {
                    let w = (slot.ts as f64 - t0) / (t1 - t0);
                    slot.value = Some(v0 + w * (v1 - v0));
                }
            }
        }
        prev = Some(idx);
    }
    series
        .with_samples(out)
        .expect("interpolation preserves series invariants")
}
