//! Generates a synthetic campus and writes it as a dataset directory
//! (manifest plus one CSV per stream).
//!
//! cargo run --example synthetic_campus -- [out_dir] [days] [seed]

use std::path::PathBuf;

use loadcast::synthetic::{generate_synthetic_campus, Dataset, SyntheticConfig};

fn main() -> loadcast::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let out = PathBuf::from(args.get(1).map(String::as_str).unwrap_or("campus-data"));
    let days = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(30);
    let seed = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(7);

    let ds: Dataset = generate_synthetic_campus(seed, days, &SyntheticConfig::default())?.into();
    let manifest = ds.write(&out, Some(seed), Some(days))?;
    println!("wrote {} streams to {}", ds.weather.len() + 1, out.display());
    for s in ds.all_series() {
        let (lo, hi) = s.samples().iter().filter_map(|x| x.value).fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));
        println!("  {:<28} {:>6} samples  [{lo:>9.2}, {hi:>9.2}] {}", s.point().as_str(), s.len(), s.unit());
    }

    let back = Dataset::load(&out)?;
    assert_eq!(back.load.samples(), ds.load.samples());
    println!("manifest lists {} files; reload matches", manifest.series.len());
    Ok(())
}
