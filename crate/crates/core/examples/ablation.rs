//! Compare every ablation mode on a small seeded suite and write the
//! CSV/JSON report.
//!
//! `cargo run --release --example ablation -- policy.json [episodes] [out_dir]`
//!
//! Train the policy first with the `behavior_cloning` example or the
//! `train-policy` command.

use std::path::PathBuf;
use std::sync::Arc;

use diffscene::bench::{
    build_suite, run_ablation_matrix, write_ablation_report, BenchConfig, SuiteConfig,
};
use diffscene::control::{AblationMode, PolicyParams};
use diffscene::world::Catalog;

fn main() -> diffscene::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(policy_path) = args.next() else {
        eprintln!("usage: ablation POLICY [EPISODES] [OUT_DIR]");
        std::process::exit(2);
    };
    let episodes: usize = args
        .next()
        .map_or(Ok(14), |s| s.parse())
        .expect("episode count must be an integer");
    let out = args
        .next()
        .map_or_else(|| std::env::temp_dir().join("ablation"), PathBuf::from);

    let policy = PolicyParams::load(policy_path.as_ref())?;
    let catalog = Arc::new(Catalog::default());
    let cfg = BenchConfig::default();
    let suite = build_suite(
        &SuiteConfig {
            episodes,
            ..SuiteConfig::default()
        },
        &cfg,
        catalog,
    )?;
    let modes = AblationMode::NAMES
        .iter()
        .map(|n| AblationMode::from_name(n))
        .collect::<diffscene::Result<Vec<_>>>()?;
    let report = run_ablation_matrix(&suite, &cfg, &modes, Some(&policy), None)?;

    println!(
        "{:<28} {:>6} {:>6} {:>6} {:>6}",
        "mode", "SR", "GC", "PLWSR", "PLWGC"
    );
    for m in &report.modes {
        let x = &m.metrics;
        println!(
            "{:<28} {:>6.3} {:>6.3} {:>6.3} {:>6.3}",
            m.mode, x.sr, x.gc, x.plwsr, x.plwgc
        );
    }
    let config = serde_json::to_value(&cfg)?;
    write_ablation_report(&out, &config, &report)?;
    println!("report in {}", out.display());
    Ok(())
}
