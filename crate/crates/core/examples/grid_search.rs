//! Sweeps learning rate and hidden size on one synthetic point and prints
//! the ranked table as CSV.
//!
//! cargo run --release --example grid_search -- [epochs]

use loadcast::lstm::TrainConfig;
use loadcast::ops::{clean_and_align, expand_grid, grid_search};
use loadcast::pipeline::PipelineConfig;
use loadcast::quality::QcPolicy;
use loadcast::synthetic::{generate_synthetic_campus, SyntheticConfig};

fn main() -> loadcast::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let campus = generate_synthetic_campus(7, 365, &SyntheticConfig::default())?;
    let (table, _) = clean_and_align(&campus.load, &campus.weather, &QcPolicy::default(), 6)?;

    let base = TrainConfig { epochs, ..TrainConfig::default() };
    let variants = expand_grid(&base, &[1e-3, 3e-3, 1e-2], &[8, 16]);
    let report = grid_search(&table, &PipelineConfig::default(), &variants)?;
    print!("{}", report.to_csv()?);
    if let Some(best) = report.best() {
        println!("# best: lr {} hidden {}", best.learning_rate, best.hidden_dim);
    }
    Ok(())
}
