//! Trains a model on a synthetic campus year and compares its 18-hour
//! forecasts with the repeat-yesterday baseline.
//!
//! cargo run --release --example forecast_vs_persistence -- [epochs] [weather|weather+load]

use std::time::Instant;

use loadcast::lstm::TrainConfig;
use loadcast::pipeline::{self, FeatureMode, PipelineConfig, HORIZON};
use loadcast::synthetic::{generate_synthetic_campus, SyntheticConfig};
use loadcast::timeseries::align;

fn main() -> loadcast::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let epochs = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let mode = match args.get(2).map(String::as_str) {
        Some("weather") => FeatureMode::WeatherOnly,
        _ => FeatureMode::WeatherAndLoad,
    };

    let campus = generate_synthetic_campus(7, 365, &SyntheticConfig::default())?;
    let table = align(&campus.load, &campus.weather)?;
    let cfg = TrainConfig { epochs, ..TrainConfig::default() };
    let pcfg = PipelineConfig { feature_mode: mode, ..PipelineConfig::default() };

    let t0 = Instant::now();
    let (record, curve) = pipeline::train_point_model(&table.point, &table, &cfg, &pcfg, 0, None)?;
    let first = curve.first().unwrap();
    let last = curve.last().unwrap();
    println!("{mode:?}: {epochs} epochs in {:.1}s", t0.elapsed().as_secs_f64());
    println!("train mse {:.4} -> {:.4}, test mse {:.4} -> {:.4}", first.train_mse, last.train_mse, first.test_mse, last.test_mse);

    let windows = pipeline::build_windows(&table, cfg.lookback, HORIZON)?;
    let split = pipeline::chronological_split(&table, &windows, &pcfg.split)?;
    let skill = pipeline::skill_vs_persistence(&record, &table, &split.test, 50)?;
    println!(
        "test MSE: model {:.1} kW², persistence {:.1} kW²; model wins {}/{} sampled issuances",
        skill.model_mse, skill.persistence_mse, skill.model_wins, skill.sampled
    );
    println!("per-step MSE (kW²):");
    for (k, v) in record.metrics.per_step_mse.iter().enumerate() {
        println!("  +{:>2}h {:>10.1}", k + 1, v);
    }
    Ok(())
}
