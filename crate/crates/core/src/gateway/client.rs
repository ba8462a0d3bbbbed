//! Client for the gateway's own API, used to pull inputs and push
//! forecasts. Connection failures and 503 responses are retried with
//! exponential backoff.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::cache::WriteOutcome;
use super::grid::{excerpt, GridDocument};
use super::store::PointInfo;
use crate::error::{Error, Result};
use crate::pipeline::ForecastGrid;
use crate::time::{format_ts, parse_ts, HOUR};
use crate::timeseries::{IntervalSeries, PointId, Sample};

/// Moves one request over the wire. `Err` means no HTTP response arrived.
pub trait Transport: Send + Sync {
    fn request(&self, method: &str, url: &str, body: Option<&str>) -> std::result::Result<(u16, String), String>;
}

pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .max_idle_connections(0)
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpTransport { agent }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        HttpTransport::new(Duration::from_secs(30))
    }
}

impl Transport for HttpTransport {
    fn request(&self, method: &str, url: &str, body: Option<&str>) -> std::result::Result<(u16, String), String> {
        let resp = match (method, body) {
            ("POST", b) => self
                .agent
                .post(url)
                .header("Content-Type", "application/json")
                .send(b.unwrap_or("")),
            _ => self.agent.get(url).call(),
        };
        let mut resp = resp.map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .with_config()
            .limit(256 << 20)
            .read_to_string()
            .map_err(|e| e.to_string())?;
        Ok((status, text))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub base_delay_ms: u64,
    pub factor: f64,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { base_delay_ms: 1000, factor: 2.0, max_attempts: 5 }
    }
}

impl RetryPolicy {
    /// Wait before attempt `n + 1`, for `n >= 1`.
    pub fn delay(&self, n: u32) -> Duration {
        Duration::from_secs_f64(self.base_delay_ms as f64 / 1000.0 * self.factor.powi(n as i32 - 1))
    }
}

type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

#[derive(Clone)]
pub struct GatewayClient {
    base: String,
    transport: Arc<dyn Transport>,
    retry: RetryPolicy,
    sleep: Sleeper,
}

impl GatewayClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        GatewayClient {
            base: base_url.into().trim_end_matches('/').to_string(),
            transport: Arc::new(HttpTransport::default()),
            retry: RetryPolicy::default(),
            sleep: Arc::new(std::thread::sleep),
        }
    }

    pub fn with_transport(mut self, t: Arc<dyn Transport>) -> Self {
        self.transport = t;
        self
    }

    pub fn with_retry(mut self, r: RetryPolicy) -> Self {
        self.retry = r;
        self
    }

    pub fn with_sleeper(mut self, f: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Arc::new(f);
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn url(&self, op: &str, params: &[(&str, &str)]) -> String {
        let mut s = format!("{}/api/{op}", self.base);
        if !params.is_empty() {
            let q = form_urlencoded::Serializer::new(String::new()).extend_pairs(params).finish();
            s.push('?');
            s.push_str(&q);
        }
        s
    }

    fn call(&self, method: &str, url: &str, body: Option<&str>) -> Result<GridDocument> {
        let attempts = self.retry.max_attempts.max(1);
        let mut last = String::new();
        for n in 1..=attempts {
            match self.transport.request(method, url, body) {
                Ok((503, text)) => {
                    let dis = GridDocument::parse(&text).ok().and_then(|g| g.dis().map(str::to_string));
                    last = format!("503 {}", dis.unwrap_or_else(|| excerpt(&text)));
                }
                Ok((status, text)) => {
                    let g = GridDocument::parse(&text)?;
                    if g.is_error() {
                        return Err(Error::Protocol(format!(
                            "{url}: {status} {}: {}",
                            g.meta_str("err").unwrap_or("error"),
                            g.dis().unwrap_or("")
                        )));
                    }
                    if status != 200 {
                        return Err(Error::Protocol(format!("{url}: status {status} without an error grid")));
                    }
                    return Ok(g);
                }
                Err(e) => last = e,
            }
            if n < attempts {
                let wait = self.retry.delay(n);
                log::warn!("{url}: attempt {n}/{attempts} failed ({last}); retrying in {wait:?}");
                (self.sleep)(wait);
            }
        }
        Err(Error::Network(format!("{url}: giving up after {attempts} attempts: {last}")))
    }

    pub fn about(&self) -> Result<GridDocument> {
        self.call("GET", &self.url("about", &[]), None)
    }

    pub fn points(&self) -> Result<Vec<PointInfo>> {
        let g = self.call("GET", &self.url("read", &[("filter", "point")]), None)?;
        g.rows
            .iter()
            .map(|r| {
                serde_json::from_value(serde_json::json!({
                    "id": r.get("id"),
                    "kind": r.get("kind"),
                    "unit": r.get("unit"),
                    "resolution_s": r.get("resolution"),
                }))
                .map_err(|e| Error::Protocol(format!("bad point row: {e}")))
            })
            .collect()
    }

    /// Reads `[start, end)` of a history point as an interval series.
    pub fn fetch_history(&self, point: &PointId, start: i64, end: i64) -> Result<IntervalSeries> {
        let range = format!("{},{}", format_ts(start), format_ts(end));
        let g = self.call("GET", &self.url("hisRead", &[("id", point.as_str()), ("range", &range)]), None)?;
        let bad = |what: String| Error::Protocol(format!("hisRead {point}: {what}: {}", excerpt(&g.to_json())));
        let unit = g.meta_str("unit").unwrap_or("").to_string();
        let resolution = g.meta.get("resolution").and_then(Value::as_i64).unwrap_or(HOUR);
        let mut samples = Vec::with_capacity(g.rows.len());
        for (i, row) in g.rows.iter().enumerate() {
            let ts = row
                .get("ts")
                .and_then(Value::as_str)
                .ok_or_else(|| bad(format!("row {i} has no ts")))
                .and_then(|s| parse_ts(s).map_err(|e| bad(e.to_string())))?;
            let value = match row.get("val") {
                None | Some(Value::Null) => None,
                Some(v) => Some(v.as_f64().ok_or_else(|| bad(format!("row {i} val is not a number")))?),
            };
            samples.push(Sample { ts, value });
        }
        IntervalSeries::new(point.clone(), unit, resolution, samples).map_err(|e| bad(e.to_string()))
    }

    /// Writes one issuance to the forecast point `target`.
    pub fn his_write(&self, target: &PointId, grid: &ForecastGrid) -> Result<WriteOutcome> {
        let mut req = GridDocument::new("hisWrite", &["ts", "val"])
            .with_meta("id", target.as_str())
            .with_meta("issuedAt", format_ts(grid.issued_at))
            .with_meta("modelVersion", grid.model_version);
        for e in &grid.entries {
            req.push(vec![format_ts(e.ts).into(), e.val.into()]);
        }
        let g = self.call("POST", &self.url("hisWrite", &[]), Some(&req.to_json()))?;
        let row = g.rows.first().ok_or_else(|| Error::Protocol("hisWrite reply has no rows".into()))?;
        let get = |k: &str| row.get(k).and_then(Value::as_u64).map(|v| v as usize);
        match (get("accepted"), get("stale")) {
            (Some(accepted), Some(stale)) => Ok(WriteOutcome { accepted, stale }),
            _ => Err(Error::Protocol(format!("hisWrite reply: {}", excerpt(&g.to_json())))),
        }
    }

    /// The effective forecast grid for a forecast point.
    pub fn forecast(&self, id: &PointId) -> Result<GridDocument> {
        self.call("GET", &self.url("forecast", &[("id", id.as_str())]), None)
    }

    /// Raw hisRead grid (includes provenance columns on forecast points).
    pub fn his_read_grid(&self, id: &PointId, start: i64, end: i64) -> Result<GridDocument> {
        let range = format!("{},{}", format_ts(start), format_ts(end));
        self.call("GET", &self.url("hisRead", &[("id", id.as_str()), ("range", &range)]), None)
    }
}
