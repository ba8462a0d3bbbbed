//! Forecast cache with latest-wins resolution per target hour.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::timeseries::PointId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub value: f64,
    pub issued_at: i64,
    pub model_version: u64,
}

impl CacheEntry {
    /// Later issuance wins, then higher model version. The value only
    /// breaks exact ties so the outcome never depends on write order.
    fn rank(&self, other: &CacheEntry) -> Ordering {
        self.issued_at
            .cmp(&other.issued_at)
            .then(self.model_version.cmp(&other.model_version))
            .then(self.value.total_cmp(&other.value))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WriteOutcome {
    pub accepted: usize,
    /// Items that lost to an entry already in the cache.
    pub stale: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForecastCache {
    points: HashMap<PointId, BTreeMap<i64, CacheEntry>>,
}

impl ForecastCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn upsert(
        &mut self,
        point: &PointId,
        items: &[(i64, f64)],
        issued_at: i64,
        model_version: u64,
    ) -> WriteOutcome {
        let slots = self.points.entry(point.clone()).or_default();
        let mut out = WriteOutcome::default();
        for &(ts, value) in items {
            let new = CacheEntry { value, issued_at, model_version };
            match slots.get(&ts) {
                Some(old) if new.rank(old) != Ordering::Greater => out.stale += 1,
                _ => {
                    slots.insert(ts, new);
                    out.accepted += 1;
                }
            }
        }
        out
    }

    /// Effective entries with `start <= ts < end`, ascending.
    pub fn range(&self, point: &PointId, start: i64, end: i64) -> Vec<(i64, CacheEntry)> {
        if start >= end {
            return Vec::new();
        }
        self.points
            .get(point)
            .map(|m| m.range(start..end).map(|(t, e)| (*t, *e)).collect())
            .unwrap_or_default()
    }

    /// Most recent issuance time among effective entries.
    pub fn latest_issue(&self, point: &PointId) -> Option<i64> {
        self.points.get(point)?.values().map(|e| e.issued_at).max()
    }

    pub fn len(&self, point: &PointId) -> usize {
        self.points.get(point).map_or(0, BTreeMap::len)
    }
}
