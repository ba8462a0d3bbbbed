//! Runs the forecasting and retraining loop against a local gateway on a
//! simulated clock: a week of hourly forecasts with a retrain every two
//! days, then prints the run log summary and registry contents.
//!
//! cargo run --release --example online_retraining

use std::sync::Arc;
use std::time::Duration;

use loadcast::gateway::{self, GatewayClient, Store};
use loadcast::lstm::TrainConfig;
use loadcast::ops::{
    clean_and_align, replay_versions, Outcome, PointBinding, RecordKind, RunLog, Runtime, RuntimeConfig,
    ScheduleConfig, SimClock,
};
use loadcast::pipeline::{train_point_model, PipelineConfig};
use loadcast::registry::Registry;
use loadcast::synthetic::{generate_synthetic_campus, Dataset, SyntheticConfig};
use loadcast::time::{DAY, HOUR};

fn main() -> loadcast::Result<()> {
    let ds: Dataset = generate_synthetic_campus(7, 372, &SyntheticConfig::default())?.into();
    let t0 = ds.load.range().unwrap().0 + 365 * DAY;
    let dir = std::env::temp_dir().join(format!("loadcast-online-{}", std::process::id()));
    let registry = Registry::open(dir.join("registry"))?;

    let train = TrainConfig { epochs: 3, hidden_dim: 8, ..TrainConfig::default() };
    let year = ds.load.slice(i64::MIN, t0 + HOUR);
    let weather: Vec<_> = ds.weather.iter().map(|w| w.slice(i64::MIN, t0 + HOUR)).collect();
    let policy = Default::default();
    let (table, _) = clean_and_align(&year, &weather, &policy, 6)?;
    let (v1, _) = train_point_model(&table.point, &table, &train, &PipelineConfig::default(), t0, None)?;
    registry.put(&v1)?;

    let store = Arc::new(Store::in_memory());
    store.import_dataset(&ds)?;
    let load = ds.load.point().clone();
    let server = gateway::serve("127.0.0.1:0", store, Some(registry.clone()))?;

    let cfg = RuntimeConfig {
        schedule: ScheduleConfig {
            retrain_interval_days: 2,
            points: vec![PointBinding::synthetic(load.clone())],
            ..ScheduleConfig::default()
        },
        train,
        retrain_epochs: 2,
        ..RuntimeConfig::default()
    };
    let log = RunLog::open(dir.join("run.jsonl"))?;
    let clock = Arc::new(SimClock::new(t0));
    let mut rt = Runtime::new(cfg, clock, GatewayClient::new(server.base_url()), registry.clone(), log)?;
    rt.run_until(t0 + 7 * DAY, Duration::from_secs(HOUR as u64))?;
    server.shutdown();

    let log = rt.log();
    for kind in [RecordKind::Qc, RecordKind::Forecast, RecordKind::Retrain, RecordKind::Alert] {
        println!("{kind:?}: {} ok, {} failed", log.count(kind, Outcome::Ok), log.count(kind, Outcome::Failed));
    }
    for r in log.records().iter().filter(|r| r.action == RecordKind::Retrain) {
        println!("  retrain at +{:>3} h -> {:?}", (r.ts - t0) / HOUR, r.model_version);
    }
    println!("replayed from log: {:?}", replay_versions(log.records()).get(&load));
    for info in registry.list(&load)? {
        println!("  v{} test mse {:.1} kW²", info.version, info.test_mse);
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
