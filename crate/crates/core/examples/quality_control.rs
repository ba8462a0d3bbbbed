//! Plants spikes and a gap in a synthetic load series, then runs the
//! sigma filter and gap imputation over it.
//!
//! cargo run --example quality_control

use loadcast::quality::{impute_missing, sigma_filter, QcPolicy, QcWindow};
use loadcast::synthetic::{generate_synthetic_campus, SyntheticConfig};
use loadcast::timeseries::Sample;

fn main() -> loadcast::Result<()> {
    let campus = generate_synthetic_campus(3, 60, &SyntheticConfig::default())?;
    let mut samples = campus.load.samples().to_vec();
    let spikes = [200, 611, 1033];
    for &i in &spikes {
        samples[i].value = samples[i].value.map(|v| v * 4.0);
    }
    for s in &mut samples[900..904] {
        *s = Sample::missing(s.ts);
    }
    let dirty = campus.load.with_samples(samples)?;

    for policy in [QcPolicy::default(), QcPolicy { window: QcWindow::Global, ..QcPolicy::default() }] {
        let (clean, report) = sigma_filter(&dirty, &policy)?;
        println!("{:?}", policy.window);
        println!("  {}", report.summary_line());
        let planted: Vec<i64> = spikes.iter().map(|&i| dirty.samples()[i].ts).collect();
        let caught = planted.iter().filter(|t| report.removed_ts.contains(t)).count();
        println!("  planted spikes caught: {caught}/{}", planted.len());

        let filled = impute_missing(&clean, 6);
        println!("  missing before imputation {}, after {}", clean.len() - clean.present_count(), filled.len() - filled.present_count());
    }
    Ok(())
}
