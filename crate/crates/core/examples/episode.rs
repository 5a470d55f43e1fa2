//! Run one task end to end, first with the full-knowledge expert and then
//! with the agent, and print the subgoal outcomes.
//!
//! `cargo run --release --example episode -- [policy.json]`
//!
//! Without a policy file the agent runs with fine control disabled.

use std::sync::Arc;

use diffscene::bench::{
    prepare_episode, run_prepared, BenchConfig, Driver, EpisodeResult, EpisodeSpec,
};
use diffscene::control::{AblationMode, PolicyParams};
use diffscene::planner::{TaskSpec, TaskType};
use diffscene::world::Catalog;

fn show(r: &EpisodeResult) {
    println!(
        "{:<10} success {}  goals {}/{}  steps {} (expert {})  failure {}",
        r.driver,
        r.success,
        r.conditions_met,
        r.conditions_total,
        r.agent_steps,
        r.expert_steps,
        r.failure.map_or("-", |f| f.name())
    );
    for s in &r.subgoals {
        println!(
            "    {:<28} {:<5} {:>4} steps",
            s.subgoal, s.success, s.steps
        );
    }
}

fn main() -> diffscene::Result<()> {
    let catalog = Arc::new(Catalog::default());
    let policy = std::env::args()
        .nth(1)
        .map(|p| PolicyParams::load(p.as_ref()))
        .transpose()?;
    let cfg = BenchConfig::default();
    let spec = EpisodeSpec {
        seed: 21,
        task: TaskSpec::new(TaskType::HeatPlace, "Potato", "CounterTop"),
    };

    let prep = prepare_episode(&spec, &cfg, catalog)?;
    println!("task {}  scene seed {}", prep.spec.task, prep.scene_seed);
    for sg in &prep.plan {
        println!("    {sg}");
    }
    show(&run_prepared(&prep, &cfg, Driver::Expert, None, None)?);

    let mode = if policy.is_some() {
        AblationMode::FULL
    } else {
        AblationMode::from_name("no-fine")?
    };
    show(&run_prepared(
        &prep,
        &cfg,
        Driver::Agent(mode),
        policy.as_ref(),
        None,
    )?);
    Ok(())
}
