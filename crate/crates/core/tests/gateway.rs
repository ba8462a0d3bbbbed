mod common;

use std::sync::{Arc, Mutex};
use std::time::Duration;

use common::*;
use loadcast::gateway::{forecast_point_id, GatewayClient, GridDocument, RetryPolicy, Store};
use loadcast::pipeline::{ForecastEntry, ForecastGrid};
use loadcast::time::{parse_ts, HOUR};
use loadcast::Error;
use serde_json::Value;

fn t0() -> i64 {
    parse_ts("2024-03-01T00:00:00Z").unwrap()
}

fn grid(issued_at: i64, version: u64, values: impl IntoIterator<Item = f64>) -> ForecastGrid {
    ForecastGrid {
        point: pid("campus-main-kw"),
        issued_at,
        model_version: version,
        entries: values
            .into_iter()
            .enumerate()
            .map(|(k, val)| ForecastEntry { ts: issued_at + (k as i64 + 1) * HOUR, val })
            .collect(),
    }
}

fn no_sleep(c: GatewayClient) -> GatewayClient {
    c.with_sleeper(|_| {})
}

/// `(hours after t0, value, issued hours after t0, version)` per row.
fn effective(client: &GatewayClient, start: i64, end: i64) -> Vec<(i64, f64, i64, u64)> {
    let fid = forecast_point_id(&pid("campus-main-kw"));
    let g = client.his_read_grid(&fid, start, end).unwrap();
    g.rows
        .iter()
        .map(|r| {
            let ts = parse_ts(r["ts"].as_str().unwrap()).unwrap();
            let at = parse_ts(r["issuedAt"].as_str().unwrap()).unwrap();
            ((ts - t0()) / HOUR, r["val"].as_f64().unwrap(), (at - t0()) / HOUR, r["modelVersion"].as_u64().unwrap())
        })
        .collect()
}

fn fresh_server(days: i64) -> (Arc<Store>, loadcast::gateway::ServerHandle, GatewayClient) {
    let store = Arc::new(Store::in_memory());
    let ds = campus(3, days);
    seed_store(&store, &ds, &[]);
    let h = start_server(store.clone(), None);
    let c = no_sleep(GatewayClient::new(h.base_url()));
    (store, h, c)
}

#[test]
fn history_round_trips_over_http() {
    let store = Arc::new(Store::in_memory());
    let ds = campus(3, 10);
    seed_store(&store, &ds, &[]);
    let h = start_server(store, None);
    let c = GatewayClient::new(h.base_url());
    let (a, b) = ds.load.range().unwrap();
    let got = c.fetch_history(ds.load.point(), a, b + HOUR).unwrap();
    assert_eq!(got.samples(), ds.load.samples());
    assert_eq!(got.unit(), ds.load.unit());
    for w in &ds.weather {
        assert_eq!(c.fetch_history(w.point(), a, b + HOUR).unwrap().samples(), w.samples());
    }
    let ids: Vec<String> = c.points().unwrap().into_iter().map(|p| p.id.to_string()).collect();
    assert!(ids.contains(&"campus-main-kw-forecast".to_string()));
    assert_eq!(c.about().unwrap().rows[0]["productName"], "loadcast");
    h.shutdown();
}

#[test]
fn overlapping_issuances_splice() {
    let (_s, h, c) = fresh_server(2);
    let fid = forecast_point_id(&pid("campus-main-kw"));
    let a = c.his_write(&fid, &grid(t0(), 1, (0..18).map(|k| 100.0 + k as f64))).unwrap();
    assert_eq!((a.accepted, a.stale), (18, 0));
    let b = c.his_write(&fid, &grid(t0() + 6 * HOUR, 2, (0..18).map(|k| 200.0 + k as f64))).unwrap();
    assert_eq!((b.accepted, b.stale), (18, 0));

    let expect = vec![
        (1, 100.0, 0, 1),
        (2, 101.0, 0, 1),
        (3, 102.0, 0, 1),
        (4, 103.0, 0, 1),
        (5, 104.0, 0, 1),
        (6, 105.0, 0, 1),
        (7, 200.0, 6, 2),
        (8, 201.0, 6, 2),
        (9, 202.0, 6, 2),
        (10, 203.0, 6, 2),
        (11, 204.0, 6, 2),
        (12, 205.0, 6, 2),
        (13, 206.0, 6, 2),
        (14, 207.0, 6, 2),
        (15, 208.0, 6, 2),
        (16, 209.0, 6, 2),
        (17, 210.0, 6, 2),
        (18, 211.0, 6, 2),
        (19, 212.0, 6, 2),
        (20, 213.0, 6, 2),
        (21, 214.0, 6, 2),
        (22, 215.0, 6, 2),
        (23, 216.0, 6, 2),
        (24, 217.0, 6, 2),
    ];
    assert_eq!(effective(&c, t0(), t0() + 30 * HOUR), expect);

    // Re-sending the older issuance changes nothing.
    let again = c.his_write(&fid, &grid(t0(), 1, (0..18).map(|k| 100.0 + k as f64))).unwrap();
    assert_eq!((again.accepted, again.stale), (0, 18));
    assert_eq!(effective(&c, t0(), t0() + 30 * HOUR), expect);

    let latest = c.forecast(&fid).unwrap();
    assert_eq!(latest.rows.len(), 18);
    assert_eq!(latest.rows[0]["val"], 200.0);
    h.shutdown();
}

#[test]
fn write_order_does_not_matter() {
    let writes = vec![
        grid(t0(), 1, (0..18).map(|k| k as f64)),
        grid(t0() + 3 * HOUR, 1, (0..18).map(|k| 50.0 + k as f64)),
        grid(t0() + 3 * HOUR, 2, (0..18).map(|k| 60.0 + k as f64)),
        grid(t0() + 3 * HOUR, 2, (0..18).map(|k| 61.0 + k as f64)),
        grid(t0() + 9 * HOUR, 1, (0..18).map(|k| 90.0 - k as f64)),
    ];
    let orders = [[0, 1, 2, 3, 4], [4, 3, 2, 1, 0], [2, 0, 4, 1, 3], [3, 4, 0, 2, 1], [1, 3, 0, 4, 2]];
    let mut states = Vec::new();
    for order in orders {
        let (_s, h, c) = fresh_server(1);
        let fid = forecast_point_id(&pid("campus-main-kw"));
        for i in order {
            c.his_write(&fid, &writes[i]).unwrap();
        }
        states.push(effective(&c, t0(), t0() + 40 * HOUR));
        h.shutdown();
    }
    assert!(states.windows(2).all(|w| w[0] == w[1]), "{states:?}");
    let s = &states[0];
    assert_eq!(s.len(), 27);
    assert_eq!(s[3], (4, 61.0, 3, 2));
    assert_eq!(s[2], (3, 2.0, 0, 1));
    assert_eq!(s[9], (10, 90.0, 9, 1));
}

#[test]
fn malformed_requests_get_error_grids() {
    let (_s, h, _c) = fresh_server(1);
    let url = format!("{}/api/hisWrite", h.base_url());
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let bodies = [
        "",
        "not json",
        "{\"meta\":{}}",
        "{\"meta\":{\"id\":\"campus-main-kw-forecast\"},\"cols\":[],\"rows\":[]}",
        "{\"meta\":{\"id\":\"campus-main-kw-forecast\",\"issuedAt\":\"2024-03-01T00:00:00Z\",\"modelVersion\":1},\"cols\":[{\"name\":\"ts\"},{\"name\":\"val\"}],\"rows\":[{\"ts\":\"2024-03-01T01:30:00Z\",\"val\":1}]}",
        "{\"meta\":{\"id\":\"campus-main-kw-forecast\",\"issuedAt\":\"2024-03-01T00:00:00Z\",\"modelVersion\":1},\"cols\":[{\"name\":\"ts\"},{\"name\":\"val\"}],\"rows\":[{\"ts\":\"2024-03-01T01:00:00Z\",\"val\":\"x\"}]}",
        "{\"meta\":{\"id\":\"campus-main-kw\",\"issuedAt\":\"2024-03-01T00:00:00Z\",\"modelVersion\":1},\"cols\":[{\"name\":\"ts\"},{\"name\":\"val\"}],\"rows\":[{\"ts\":\"2024-03-01T01:00:00Z\",\"val\":1}]}",
        "{\"meta\":{\"id\":\"nope\",\"issuedAt\":\"2024-03-01T00:00:00Z\",\"modelVersion\":1},\"cols\":[{\"name\":\"ts\"},{\"name\":\"val\"}],\"rows\":[{\"ts\":\"2024-03-01T01:00:00Z\",\"val\":1}]}",
    ];
    for body in bodies {
        let mut resp = agent.post(&url).header("Content-Type", "application/json").send(body).unwrap();
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().unwrap();
        assert!(status == 400 || status == 404, "{body}: {status}");
        let g = GridDocument::parse(&text).unwrap();
        assert!(g.is_error(), "{body}: {text}");
        assert!(!g.dis().unwrap_or("").is_empty());
    }
    let bad_range = agent.get(format!("{}/api/hisRead?id=campus-main-kw&range=yesterday", h.base_url())).call().unwrap();
    assert_eq!(bad_range.status().as_u16(), 400);
    let c = GatewayClient::new(h.base_url());
    assert!(c.about().is_ok(), "server survives garbage");
    h.shutdown();
}

#[test]
fn store_outage_is_retried() {
    let (store, h, _) = fresh_server(1);
    store.set_fault(true);
    let waits = Arc::new(Mutex::new(Vec::new()));
    let w = waits.clone();
    let s = store.clone();
    let c = GatewayClient::new(h.base_url()).with_sleeper(move |d| {
        w.lock().unwrap().push(d);
        if w.lock().unwrap().len() == 2 {
            s.set_fault(false);
        }
    });
    let series = c.fetch_history(&pid("campus-main-kw"), 0, t0()).unwrap();
    assert!(!series.is_empty());
    assert_eq!(*waits.lock().unwrap(), vec![Duration::from_secs(1), Duration::from_secs(2)]);

    store.set_fault(true);
    let c = no_sleep(GatewayClient::new(h.base_url()));
    match c.about() {
        Err(Error::Network(m)) => assert!(m.contains("5 attempts") && m.contains("503"), "{m}"),
        other => panic!("expected network error, got {other:?}"),
    }
    h.shutdown();
}

#[test]
fn transient_connection_failures_are_retried() {
    let (_s, h, _) = fresh_server(1);
    let flaky = Flaky::new(2);
    let waits = Arc::new(Mutex::new(Vec::new()));
    let w = waits.clone();
    let c = GatewayClient::new(h.base_url())
        .with_transport(flaky.clone())
        .with_sleeper(move |d| w.lock().unwrap().push(d));
    let g = c.about().unwrap();
    assert_eq!(g.rows.len(), 1);
    assert_eq!(*flaky.calls.lock().unwrap(), 3);
    assert_eq!(*waits.lock().unwrap(), vec![Duration::from_secs(1), Duration::from_secs(2)]);

    let flaky = Flaky::new(usize::MAX);
    let c = no_sleep(GatewayClient::new(h.base_url()).with_transport(flaky.clone()))
        .with_retry(RetryPolicy { max_attempts: 3, ..RetryPolicy::default() });
    assert!(matches!(c.about(), Err(Error::Network(_))));
    assert_eq!(*flaky.calls.lock().unwrap(), 3);
    h.shutdown();
}

#[test]
fn forecast_cache_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let fid = forecast_point_id(&pid("campus-main-kw"));
    {
        let store = Arc::new(Store::open(dir.path()).unwrap());
        seed_store(&store, &campus(3, 1), &[]);
        let h = start_server(store, None);
        let c = GatewayClient::new(h.base_url());
        c.his_write(&fid, &grid(t0(), 1, (0..18).map(|k| k as f64))).unwrap();
        c.his_write(&fid, &grid(t0() + HOUR, 2, (0..18).map(|k| 10.0 * k as f64))).unwrap();
        h.shutdown();
    }
    let store = Arc::new(Store::open(dir.path()).unwrap());
    let h = start_server(store, None);
    let c = GatewayClient::new(h.base_url());
    let rows = effective(&c, t0(), t0() + 30 * HOUR);
    assert_eq!(rows.len(), 19);
    assert_eq!(rows[0], (1, 0.0, 0, 1));
    assert_eq!(rows[1], (2, 0.0, 1, 2));
    let g = c.forecast(&fid).unwrap();
    assert_eq!(g.meta.get("issuedAt").and_then(Value::as_str), Some("2024-03-01T01:00:00Z"));
    h.shutdown();
}
