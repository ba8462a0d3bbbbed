mod common;

use std::sync::OnceLock;

use common::*;
use loadcast::lstm::{predict, LstmParameters, RegressorHead};
use loadcast::pipeline::{
    build_windows, chronological_split, evaluate_windows, fit_scaler, prepare, train_point_model, FeatureMode,
    ModelView, PipelineConfig, HORIZON,
};
use loadcast::time::MONTH;
use loadcast::timeseries::AlignedTable;

fn year() -> &'static AlignedTable {
    static T: OnceLock<AlignedTable> = OnceLock::new();
    T.get_or_init(|| table(&campus(7, 365)))
}

/// Population mean and std of the load over every row some train window
/// touches, counted once.
fn load_stats_oracle(t: &AlignedTable, starts: &[usize], span: usize) -> (f64, f64) {
    let mut rows: Vec<usize> = starts.iter().flat_map(|s| *s..*s + span).collect();
    rows.sort_unstable();
    rows.dedup();
    let n = rows.len() as f64;
    let mean = rows.iter().map(|i| t.rows[*i].load).sum::<f64>() / n;
    let var = rows.iter().map(|i| (t.rows[*i].load - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[test]
fn zero_weights_forecast_the_head_bias() {
    let t = year();
    let windows = build_windows(t, 24, HORIZON).unwrap();
    let split = chronological_split(t, &windows, &Default::default()).unwrap();
    let scaler = fit_scaler(t, &split.train, 24, HORIZON).unwrap();
    let starts: Vec<usize> = split.train.iter().map(|w| w.start).collect();
    let (mean, std) = load_stats_oracle(t, &starts, 24 + HORIZON);
    assert!((scaler.mean[6] - mean).abs() < 1e-9 * mean.abs());
    assert!((scaler.std[6] - std).abs() < 1e-9 * std);

    let params = LstmParameters::zeros(6, 5);
    let mut head = RegressorHead::zeros(5, HORIZON);
    for (k, b) in head.b_y.iter_mut().enumerate() {
        *b = 0.1 * k as f64 - 0.5;
    }
    let view = ModelView { params: &params, head: &head, scaler: &scaler, mode: FeatureMode::WeatherOnly, lookback: 24 };
    let w = split.test[17];
    let y = view.predict_rows(&t.rows[w.start..w.start + 24]).unwrap();
    for (k, v) in y.iter().enumerate() {
        let expect = (0.1 * k as f64 - 0.5) * std + mean;
        assert!((v - expect).abs() < 1e-9 * expect.abs(), "step {k}: {v} vs {expect}");
    }
}

#[test]
fn evaluation_matches_brute_force() {
    let t = year();
    let (record, _) = train_point_model(&t.point, t, &quick_train(1), &PipelineConfig::default(), 0, None).unwrap();
    let data = prepare(t, 24, &PipelineConfig::default()).unwrap();
    let picks: Vec<_> = [0, 40, 300, 777, data.split.test.len() - 1].iter().map(|i| data.split.test[*i]).collect();
    let m = evaluate_windows(ModelView::from(&record), t, &picks).unwrap();

    let mut per = [0.0; HORIZON];
    for w in &picks {
        let (x, y) = w.raw(t, FeatureMode::WeatherOnly, 24, HORIZON);
        let mut xs = x.clone();
        for r in 0..xs.rows() {
            for c in 0..xs.cols() {
                xs.set(r, c, (x.get(r, c) - record.scaler.mean[c]) / record.scaler.std[c]);
            }
        }
        let yhat = predict(&record.params, &record.head, &xs).unwrap();
        for k in 0..HORIZON {
            let pred = yhat[k] * record.scaler.std[6] + record.scaler.mean[6];
            per[k] += (pred - y[k]).powi(2) / picks.len() as f64;
        }
    }
    for k in 0..HORIZON {
        assert!((m.per_step_mse[k] - per[k]).abs() <= 1e-9 * per[k].max(1.0), "step {k}");
    }
    let overall = per.iter().sum::<f64>() / HORIZON as f64;
    assert!((m.overall_mse - overall).abs() <= 1e-9 * overall);
    assert_eq!(m.pairs, 5);
}

#[test]
fn training_is_deterministic() {
    let t = year();
    let cfg = quick_train(2);
    let a = train_point_model(&t.point, t, &cfg, &PipelineConfig::default(), 42, None).unwrap();
    let b = train_point_model(&t.point, t, &cfg, &PipelineConfig::default(), 42, None).unwrap();
    assert_eq!(a.0.to_bytes(), b.0.to_bytes());
    assert_eq!(a.1, b.1);
}

#[test]
fn test_period_never_reaches_training() {
    let t = year();
    let cfg = PipelineConfig::default();
    let base = prepare(t, 24, &cfg).unwrap();
    let boundary = base.split.boundary;
    assert_eq!(boundary, t.end().unwrap() - 2 * MONTH);
    assert!(base.split.train.iter().all(|w| w.last_target_ts < boundary));
    assert!(base.split.test.iter().all(|w| w.first_target_ts >= boundary));
    assert!(base.scaler.fit_end <= boundary);

    let mut poisoned = t.clone();
    for r in poisoned.rows.iter_mut().filter(|r| r.ts >= boundary) {
        r.load *= 10.0;
        r.weather.dry_bulb_temp += 40.0;
    }
    let p = prepare(&poisoned, 24, &cfg).unwrap();
    assert_eq!(p.scaler, base.scaler);
    assert_eq!(p.train.len(), base.train.len());
    for (a, b) in p.train.iter().zip(&base.train) {
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
    }
    let (ra, ca) = train_point_model(&t.point, t, &quick_train(1), &cfg, 0, None).unwrap();
    let (rb, cb) = train_point_model(&t.point, &poisoned, &quick_train(1), &cfg, 0, None).unwrap();
    assert_eq!(ra.params, rb.params);
    let train_losses = |c: &loadcast::lstm::LossCurve| c.entries.iter().map(|e| e.train_mse).collect::<Vec<_>>();
    assert_eq!(train_losses(&ca), train_losses(&cb));
}

#[test]
fn weather_and_load_mode_uses_seven_inputs() {
    let t = year();
    let cfg = PipelineConfig { feature_mode: FeatureMode::WeatherAndLoad, ..Default::default() };
    let (r, curve) = train_point_model(&t.point, t, &quick_train(1), &cfg, 0, None).unwrap();
    assert_eq!(r.params.input_dim(), 7);
    assert_eq!(curve.entries.len(), 1);
}
