//! Stores several model versions for a point, lists them, rolls back by
//! promotion, prunes, and shows that a corrupted file is rejected.
//!
//! cargo run --example registry_versions

use loadcast::lstm::TrainConfig;
use loadcast::ops::clean_and_align;
use loadcast::pipeline::{train_point_model, PipelineConfig};
use loadcast::quality::QcPolicy;
use loadcast::registry::Registry;
use loadcast::synthetic::{generate_synthetic_campus, SyntheticConfig};

fn main() -> loadcast::Result<()> {
    let dir = std::env::temp_dir().join(format!("loadcast-registry-{}", std::process::id()));
    let registry = Registry::open(&dir)?;

    let campus = generate_synthetic_campus(7, 365, &SyntheticConfig::default())?;
    let (table, _) = clean_and_align(&campus.load, &campus.weather, &QcPolicy::default(), 6)?;
    let point = table.point.clone();
    for (i, epochs) in [1, 3, 5].into_iter().enumerate() {
        let cfg = TrainConfig { epochs, hidden_dim: 8, ..TrainConfig::default() };
        let (record, _) = train_point_model(&point, &table, &cfg, &PipelineConfig::default(), 1_700_000_000 + i as i64, None)?;
        let v = registry.put(&record)?;
        println!("stored v{v} ({epochs} epochs)");
    }

    let show = |title: &str| -> loadcast::Result<()> {
        println!("{title}");
        for info in registry.list(&point)? {
            println!("  v{:<3} created {:>10}  test mse {:>10.1}", info.version, info.created_at, info.test_mse);
        }
        Ok(())
    };
    show("versions:")?;

    let v = registry.promote(&point, 1, 1_800_000_000)?;
    println!("promoted v1 as v{v}; latest is now v{}", registry.get_latest(&point)?.version);
    let removed = registry.prune(&point, 2)?;
    println!("pruned {removed:?}");
    show("after prune:")?;

    let v = registry.versions(&point)?[0];
    let path = dir.join(point.sanitized()).join(format!("v{v:08}.lcm"));
    let mut bytes = std::fs::read(&path)?;
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(&path, bytes)?;
    match registry.get_version(&point, v) {
        Ok(_) => println!("corruption went unnoticed"),
        Err(e) => println!("flipped one bit in v{v}: {e}"),
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
