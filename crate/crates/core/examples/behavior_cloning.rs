//! Label expert demonstrations on seeded scenes, fit the fine policy and
//! save it.
//!
//! `cargo run --release --example behavior_cloning -- [scenes] [policy.json]`
//!
//! Fifty scenes reproduce the policy used by the benchmark; the default of
//! twelve finishes in a few seconds.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use diffscene::imitation::{collect_dataset, train_bc, DatasetConfig, Split, TrainConfig};
use diffscene::world::Catalog;

fn main() -> diffscene::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: u64 = args
        .next()
        .map_or(Ok(12), |s| s.parse())
        .expect("scene count must be an integer");
    let out = args
        .next()
        .map_or_else(|| std::env::temp_dir().join("policy.json"), PathBuf::from);

    let catalog = Arc::new(Catalog::default());
    let t = Instant::now();
    let seeds: Vec<u64> = (0..n).collect();
    let ds = collect_dataset(&seeds, catalog.clone(), &DatasetConfig::default())?;
    println!(
        "{} train rows, {} held-out rows, {} objects without an interactable pose ({:.1?})",
        ds.split(Split::Train).count(),
        ds.split(Split::Heldout).count(),
        ds.skipped,
        t.elapsed()
    );

    let t = Instant::now();
    let (policy, report) = train_bc(&ds, catalog.len(), &TrainConfig::default())?;
    println!("trained in {:.1?}", t.elapsed());
    println!(
        "  first/last epoch loss {:.4} / {:.4}",
        report.epoch_loss[0],
        report.epoch_loss[report.epoch_loss.len() - 1]
    );
    println!("  train accuracy   {:.4}", report.train_accuracy);
    match report.heldout_accuracy {
        Some(a) => println!("  heldout accuracy {a:.4}"),
        None => println!("  no held-out scenes"),
    }
    for w in &report.warnings {
        println!("  warning: {w}");
    }
    policy.save(&out)?;
    println!("saved {}", out.display());
    Ok(())
}
