//! Serves a synthetic campus over HTTP, reads history back through the
//! client, posts two overlapping forecast issuances and reads back the
//! spliced result.
//!
//! cargo run --example haystack_gateway

use std::sync::Arc;

use loadcast::gateway::{self, GatewayClient, Store};
use loadcast::pipeline::{ForecastEntry, ForecastGrid, HORIZON};
use loadcast::synthetic::{generate_synthetic_campus, Dataset, SyntheticConfig};
use loadcast::time::HOUR;

fn issuance(point: &loadcast::timeseries::PointId, issued_at: i64, version: u64, base: f64) -> ForecastGrid {
    let entries = (1..=HORIZON as i64).map(|k| ForecastEntry { ts: issued_at + k * HOUR, val: base + k as f64 }).collect();
    ForecastGrid { point: point.clone(), issued_at, model_version: version, entries }
}

fn main() -> loadcast::Result<()> {
    let ds: Dataset = generate_synthetic_campus(7, 14, &SyntheticConfig::default())?.into();
    let store = Arc::new(Store::in_memory());
    let target = store.import_dataset(&ds)?;
    let load = ds.load.point().clone();
    let server = gateway::serve("127.0.0.1:0", store, None)?;
    let client = GatewayClient::new(server.base_url());
    println!("serving on {}", server.base_url());

    let about = client.about()?;
    println!("about: {}", about.to_json());
    for p in client.points()? {
        println!("  {:<28} {:?} {}", p.id.as_str(), p.kind, p.unit);
    }

    let (_, end) = ds.load.range().unwrap();
    let day = client.fetch_history(&load, end - 24 * HOUR, end + HOUR)?;
    println!("hisRead last day: {} samples, starting {}", day.len(), day.samples()[0].ts);

    let t0 = end - 6 * HOUR;
    let first = client.his_write(&target, &issuance(&target, t0, 1, 100.0))?;
    let second = client.his_write(&target, &issuance(&target, t0 + 6 * HOUR, 1, 200.0))?;
    let replay = client.his_write(&target, &issuance(&target, t0, 1, 100.0))?;
    println!("writes: first {first:?}, overlapping {second:?}, resent first {replay:?}");

    let latest = client.forecast(&target)?;
    println!("forecast endpoint: {} rows issued at {}", latest.rows.len(), latest.meta_str("issuedAt").unwrap_or("-"));
    let spliced = client.his_read_grid(&target, t0 + HOUR, t0 + 25 * HOUR)?;
    println!("cached hours across both issuances:");
    for row in &spliced.rows {
        println!("  {} {:>6} (issued {})", row["ts"].as_str().unwrap(), row["val"], row["issuedAt"].as_str().unwrap());
    }
    server.shutdown();
    Ok(())
}
