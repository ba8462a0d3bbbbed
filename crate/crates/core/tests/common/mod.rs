//! Fixtures shared by the integration tests and the acceptance binary.
#![allow(dead_code)]

use std::sync::{Arc, Mutex};

use loadcast::gateway::{self, forecast_point_id, HttpTransport, PointInfo, PointKind, ServerHandle, Store, Transport};
use loadcast::lstm::{init_parameters, TrainConfig};
use loadcast::ops::{self, PointBinding};
use loadcast::pipeline::{FeatureMode, FeatureScaler, Metrics, SplitSpec, HORIZON};
use loadcast::registry::{ModelRecord, Registry};
use loadcast::synthetic::{generate_synthetic_campus, Dataset, SyntheticConfig};
use loadcast::timeseries::{AlignedTable, IntervalSeries, PointId};

pub fn pid(s: &str) -> PointId {
    PointId::new(s).unwrap()
}

pub fn campus(seed: u64, days: i64) -> Dataset {
    generate_synthetic_campus(seed, days, &SyntheticConfig::default()).unwrap().into()
}

pub fn table(ds: &Dataset) -> AlignedTable {
    let policy = loadcast::quality::QcPolicy::default();
    ops::clean_and_align(&ds.load, &ds.weather, &policy, 6).unwrap().0
}

/// Small, fast training settings.
pub fn quick_train(epochs: usize) -> TrainConfig {
    TrainConfig { epochs, hidden_dim: 8, ..TrainConfig::default() }
}

/// A valid record with arbitrary weights, for registry tests.
pub fn dummy_record(point: &str, seed: u64) -> ModelRecord {
    let (params, head) = init_parameters(seed, 6, 4, HORIZON).unwrap();
    ModelRecord {
        point: pid(point),
        version: 0,
        created_at: 1_700_000_000 + seed as i64,
        feature_mode: FeatureMode::WeatherOnly,
        train_config: TrainConfig { hidden_dim: 4, ..TrainConfig::default() },
        split: SplitSpec::default(),
        scaler: FeatureScaler { mean: [0.0; 7], std: [1.0; 7], fit_start: 0, fit_end: 3600 },
        params,
        head,
        metrics: Metrics {
            pairs: 1,
            overall_mse: seed as f64,
            per_step_mse: vec![seed as f64; HORIZON],
            overall_mse_scaled: 0.0,
            per_step_mse_scaled: vec![0.0; HORIZON],
        },
    }
}

/// Copy of `series` under another point id.
pub fn renamed(series: &IntervalSeries, id: &str) -> IntervalSeries {
    IntervalSeries::new(pid(id), series.unit(), series.resolution_s(), series.samples().to_vec()).unwrap()
}

/// Imports `ds` plus extra load points (sharing its weather) and returns
/// one binding per load point.
pub fn seed_store(store: &Store, ds: &Dataset, extra_loads: &[IntervalSeries]) -> Vec<PointBinding> {
    store.import_dataset(ds).unwrap();
    let mut out = vec![PointBinding::synthetic(ds.load.point().clone())];
    for s in extra_loads {
        store.import_series(s).unwrap();
        store
            .register(PointInfo { id: forecast_point_id(s.point()), kind: PointKind::Forecast, unit: s.unit().into(), resolution_s: 3600 })
            .unwrap();
        out.push(PointBinding::synthetic(s.point().clone()));
    }
    out
}

pub fn start_server(store: Arc<Store>, registry: Option<Registry>) -> ServerHandle {
    gateway::serve("127.0.0.1:0", store, registry).unwrap()
}

/// Real HTTP transport that keeps a copy of every POST body.
pub struct Recording {
    inner: HttpTransport,
    pub posts: Mutex<Vec<String>>,
}

impl Recording {
    pub fn new() -> Arc<Self> {
        Arc::new(Recording { inner: HttpTransport::default(), posts: Mutex::new(Vec::new()) })
    }
}

impl Transport for Recording {
    fn request(&self, method: &str, url: &str, body: Option<&str>) -> Result<(u16, String), String> {
        if method == "POST" {
            self.posts.lock().unwrap().push(body.unwrap_or("").to_string());
        }
        self.inner.request(method, url, body)
    }
}

/// Transport that fails the first `n` calls, then delegates.
pub struct Flaky {
    inner: HttpTransport,
    pub remaining_failures: Mutex<usize>,
    pub calls: Mutex<usize>,
}

impl Flaky {
    pub fn new(n: usize) -> Arc<Self> {
        Arc::new(Flaky { inner: HttpTransport::default(), remaining_failures: Mutex::new(n), calls: Mutex::new(0) })
    }
}

impl Transport for Flaky {
    fn request(&self, method: &str, url: &str, body: Option<&str>) -> Result<(u16, String), String> {
        *self.calls.lock().unwrap() += 1;
        let mut left = self.remaining_failures.lock().unwrap();
        if *left > 0 {
            *left -= 1;
            return Err("connection refused (injected)".into());
        }
        drop(left);
        self.inner.request(method, url, body)
    }
}

/// Everything an end-to-end loopback run leaves behind.
pub struct LoopbackRun {
    pub t0: i64,
    pub bindings: Vec<PointBinding>,
    pub records: Vec<ops::RunRecord>,
    pub log_file: Vec<ops::RunRecord>,
    pub versions_before: std::collections::BTreeMap<PointId, Vec<u64>>,
    pub versions_after: std::collections::BTreeMap<PointId, Vec<u64>>,
    pub posts: Vec<String>,
}

/// Serves 367 days of two campus meters, pre-trains v1 for each on the
/// first 365 days, then runs the scheduler on a simulated clock for
/// `hours` from day 365 with a one-day retrain interval.
pub fn loopback_run(hours: i64, fault: Option<(usize, ops::FaultStage)>) -> LoopbackRun {
    use loadcast::gateway::GatewayClient;
    use loadcast::ops::{RunLog, Runtime, RuntimeConfig, ScheduleConfig, SimClock};
    use loadcast::pipeline::{train_point_model, PipelineConfig};
    use loadcast::time::{DAY, HOUR};

    let ds = campus(7, 367);
    let east = renamed(&campus(8, 367).load, "campus-east-kw");
    let store = Arc::new(Store::in_memory());
    let bindings = seed_store(&store, &ds, std::slice::from_ref(&east));
    let t0 = ds.load.range().unwrap().0 + 365 * DAY;

    let dir = tempfile::tempdir().unwrap();
    let registry = Registry::open(dir.path().join("registry")).unwrap();
    let train = quick_train(1);
    let pipeline = PipelineConfig::default();
    for load in [&ds.load, &east] {
        let year = load.slice(i64::MIN, t0 + HOUR);
        let weather: Vec<_> = ds.weather.iter().map(|w| w.slice(i64::MIN, t0 + HOUR)).collect();
        let policy = loadcast::quality::QcPolicy::default();
        let t = ops::clean_and_align(&year, &weather, &policy, 6).unwrap().0;
        let (r, _) = train_point_model(load.point(), &t, &train, &pipeline, t0, None).unwrap();
        registry.put(&r).unwrap();
    }
    let snapshot = |reg: &Registry| bindings.iter().map(|b| (b.load.clone(), reg.versions(&b.load).unwrap())).collect();
    let versions_before = snapshot(&registry);

    let server = start_server(store, Some(registry.clone()));
    let transport = Recording::new();
    let client = GatewayClient::new(server.base_url()).with_transport(transport.clone()).with_sleeper(|_| {});
    let cfg = RuntimeConfig {
        schedule: ScheduleConfig { retrain_interval_days: 1, points: bindings.clone(), ..ScheduleConfig::default() },
        train,
        pipeline,
        retrain_epochs: 1,
        ..RuntimeConfig::default()
    };
    let clock = Arc::new(SimClock::new(t0));
    let log_path = dir.path().join("run.jsonl");
    let mut rt = Runtime::new(cfg, clock, client, registry.clone(), RunLog::open(&log_path).unwrap()).unwrap();
    if let Some((i, stage)) = fault {
        rt.inject_fault(&bindings[i].load, stage);
    }
    rt.run_until(t0 + hours * HOUR, std::time::Duration::from_secs(HOUR as u64)).unwrap();
    server.shutdown();
    let posts = transport.posts.lock().unwrap().clone();

    LoopbackRun {
        t0,
        records: rt.log().records().to_vec(),
        log_file: RunLog::read(&log_path).unwrap(),
        versions_before,
        versions_after: snapshot(&registry),
        posts,
        bindings,
    }
}

impl LoopbackRun {
    pub fn count(&self, point: &PointId, kind: ops::RecordKind, outcome: ops::Outcome) -> usize {
        self.records.iter().filter(|r| &r.point == point && r.action == kind && r.outcome == outcome).count()
    }
}
