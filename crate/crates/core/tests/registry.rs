mod common;

use std::process::{Command, Stdio};
use std::thread;
use std::time::Duration;

use common::*;
use loadcast::registry::{ModelRecord, Registry};
use rand::{Rng, SeedableRng};

const CHILD_ENV: &str = "LOADCAST_REGISTRY_WRITER";

/// Child mode for `killed_writers_leave_registry_readable`: writes versions
/// until killed. A no-op in a normal test run.
#[test]
fn writer_child() {
    let Ok(dir) = std::env::var(CHILD_ENV) else { return };
    let reg = Registry::open(dir).unwrap();
    let mut seed = 0;
    loop {
        seed += 1;
        reg.put(&dummy_record("meter-a", seed)).unwrap();
    }
}

fn assert_healthy(reg: &Registry, point: &str) -> Vec<u64> {
    let p = pid(point);
    let versions = reg.versions(&p).unwrap();
    let expect: Vec<u64> = (1..=versions.len() as u64).collect();
    assert_eq!(versions, expect, "versions not contiguous");
    for v in &versions {
        let r = reg.get_version(&p, *v).unwrap();
        assert_eq!((r.point.as_str(), r.version), (point, *v));
    }
    versions
}

#[test]
fn killed_writers_leave_registry_readable() {
    let dir = tempfile::tempdir().unwrap();
    let exe = std::env::current_exe().unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut last = 0;
    for trial in 0..10 {
        let mut child = Command::new(&exe)
            .args(["--exact", "writer_child", "--nocapture", "--test-threads=1"])
            .env(CHILD_ENV, dir.path())
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        thread::sleep(Duration::from_millis(rng.gen_range(20..120)));
        child.kill().unwrap();
        child.wait().unwrap();
        let reg = Registry::open(dir.path()).unwrap();
        let versions = assert_healthy(&reg, "meter-a");
        assert!(versions.len() as u64 >= last, "trial {trial}: versions went backwards");
        last = versions.len() as u64;
        if let Some(v) = versions.last() {
            assert_eq!(reg.get_latest(&pid("meter-a")).unwrap().version, *v);
        }
    }
    assert!(last > 0, "writer never got to write");
    let reg = Registry::open(dir.path()).unwrap();
    let next = reg.put(&dummy_record("meter-a", 999)).unwrap();
    assert_eq!(next, last + 1);
    let leftovers = std::fs::read_dir(dir.path().join("meter-a"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with(".tmp-"))
        .count();
    assert_eq!(leftovers, 0, "temp files survive the next put");
}

#[test]
fn concurrent_writers_on_one_point_get_distinct_versions() {
    let dir = tempfile::tempdir().unwrap();
    let reg = Registry::open(dir.path()).unwrap();
    let handles: Vec<_> = (0..4)
        .map(|t| {
            let reg = reg.clone();
            thread::spawn(move || (0..5).map(|i| reg.put(&dummy_record("shared", t * 10 + i)).unwrap()).collect::<Vec<_>>())
        })
        .collect();
    let mut got: Vec<u64> = handles.into_iter().flat_map(|h| h.join().unwrap()).collect();
    got.sort_unstable();
    assert_eq!(got, (1..=20).collect::<Vec<_>>());
    assert_healthy(&reg, "shared");
}

#[test]
fn points_train_in_isolation() {
    let dir = tempfile::tempdir().unwrap();
    let reg = Registry::open(dir.path()).unwrap();
    let names: [&'static str; 3] = ["bldg-1", "bldg-2", "bldg-3"];
    let handles: Vec<_> = names
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let reg = reg.clone();
            thread::spawn(move || {
                for k in 0..=i as u64 {
                    reg.put(&dummy_record(n, 100 * i as u64 + k)).unwrap();
                }
            })
        })
        .collect();
    handles.into_iter().for_each(|h| h.join().unwrap());
    for (i, n) in names.iter().enumerate() {
        let versions = assert_healthy(&reg, n);
        assert_eq!(versions.len(), i + 1);
        let latest: ModelRecord = reg.get_latest(&pid(n)).unwrap();
        assert_eq!(latest.metrics.overall_mse, (100 * i + i) as f64);
    }
    assert_eq!(reg.points().unwrap().len(), 3);
}
