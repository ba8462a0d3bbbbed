//! Trains one point model on a synthetic year and writes the loss curve
//! and per-step test MSE as CSV.
//!
//! cargo run --release --example train_campus -- [epochs] [out_dir]

use std::fs::File;
use std::path::PathBuf;

use loadcast::lstm::TrainConfig;
use loadcast::ops::clean_and_align;
use loadcast::pipeline::{train_point_model, PipelineConfig};
use loadcast::quality::QcPolicy;
use loadcast::synthetic::{generate_synthetic_campus, SyntheticConfig};

fn main() -> loadcast::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let epochs = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let out = PathBuf::from(args.get(2).map(String::as_str).unwrap_or("."));

    let campus = generate_synthetic_campus(7, 365, &SyntheticConfig::default())?;
    let (table, reports) = clean_and_align(&campus.load, &campus.weather, &QcPolicy::default(), 6)?;
    for r in &reports {
        println!("{}", r.summary_line());
    }

    let cfg = TrainConfig { epochs, ..TrainConfig::default() };
    let (record, curve) = train_point_model(&table.point, &table, &cfg, &PipelineConfig::default(), 0, None)?;
    curve.write_csv(File::create(out.join("loss_curve.csv"))?)?;
    std::fs::write(out.join("per_step_mse.csv"), record.metrics.per_step_csv())?;

    let (a, b) = (curve.first().unwrap(), curve.last().unwrap());
    println!("epochs {epochs}: train {:.4} -> {:.4}, test {:.4} -> {:.4} (scaled)", a.train_mse, b.train_mse, a.test_mse, b.test_mse);
    println!("test MSE {:.1} kW² over {} pairs", record.metrics.overall_mse, record.metrics.pairs);
    println!("wrote loss_curve.csv and per_step_mse.csv to {}", out.display());
    Ok(())
}
