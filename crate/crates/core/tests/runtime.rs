mod common;

use common::*;
use loadcast::gateway::parse_his_write;
use loadcast::ops::{replay_versions, FaultStage, Outcome, RecordKind, ALERT_AFTER};
use loadcast::time::HOUR;

#[test]
fn two_days_of_operation() {
    let run = loopback_run(48, None);
    for b in &run.bindings {
        assert_eq!(run.count(&b.load, RecordKind::Forecast, Outcome::Ok), 48, "{}", b.load);
        assert_eq!(run.count(&b.load, RecordKind::Retrain, Outcome::Ok), 1, "{}", b.load);
        assert_eq!(run.count(&b.load, RecordKind::Qc, Outcome::Ok), 48);
        assert_eq!(run.versions_after[&b.load], vec![1, 2]);
        let retrain = run
            .records
            .iter()
            .find(|r| r.point == b.load && r.action == RecordKind::Retrain)
            .unwrap();
        assert_eq!(retrain.ts, run.t0 + 24 * HOUR);
    }
    assert!(run.records.iter().all(|r| r.outcome == Outcome::Ok));
    assert_eq!(run.log_file, run.records);

    let replayed = replay_versions(&run.log_file);
    for b in &run.bindings {
        let mut history = run.versions_before[&b.load].clone();
        history.extend(&replayed[&b.load]);
        assert_eq!(history, run.versions_after[&b.load]);
    }

    assert_eq!(run.posts.len(), 96);
    for body in &run.posts {
        let (_, items, issued_at, version) = parse_his_write(body).unwrap();
        assert_eq!(items.len(), 18);
        for (k, (ts, _)) in items.iter().enumerate() {
            assert_eq!(*ts, issued_at + (k as i64 + 1) * HOUR);
        }
        let expect_version = if issued_at >= run.t0 + 24 * HOUR { 2 } else { 1 };
        assert_eq!(version, expect_version);
    }
}

#[test]
fn qc_failure_on_one_point_spares_the_other() {
    let run = loopback_run(4, Some((0, FaultStage::Qc)));
    let (bad, good) = (&run.bindings[0].load, &run.bindings[1].load);
    assert_eq!(run.count(bad, RecordKind::Qc, Outcome::Failed), 4);
    assert_eq!(run.count(bad, RecordKind::Forecast, Outcome::Failed), 4);
    assert_eq!(run.count(bad, RecordKind::Forecast, Outcome::Ok), 0);
    assert_eq!(run.count(good, RecordKind::Forecast, Outcome::Ok), 4);
    assert!(run.records.iter().filter(|r| &r.point == good).all(|r| r.outcome == Outcome::Ok));
    assert_eq!(run.posts.len(), 4);
}

#[test]
fn repeated_retrain_failures_raise_one_alert() {
    // The retrain interval elapses at hour 24; hours 24..28 all fail.
    let run = loopback_run(28, Some((1, FaultStage::Retrain)));
    let p = &run.bindings[1].load;
    assert_eq!(run.count(p, RecordKind::Retrain, Outcome::Failed), 4);
    assert_eq!(run.count(p, RecordKind::Alert, Outcome::Failed), 1);
    let alert = run.records.iter().find(|r| r.action == RecordKind::Alert).unwrap();
    assert_eq!(alert.ts, run.t0 + (24 + ALERT_AFTER as i64 - 1) * HOUR);
    assert_eq!(run.count(p, RecordKind::Forecast, Outcome::Ok), 28, "forecasts continue on the old model");
    assert_eq!(run.versions_after[p], vec![1]);
    assert_eq!(run.versions_after[&run.bindings[0].load], vec![1, 2]);
}
