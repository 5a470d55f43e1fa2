//! Episode runner, metrics and seeded benchmark suites.
//!
//! An episode generates a scene from its seed, turns the agent around once
//! to seed the map, runs the task's subgoals and scores the final scene.
//! The expert solves the same plan in the same scene to give the reference
//! path length used by the weighted metrics.

mod episode;
mod metrics;
pub mod render;
mod report;
mod suite;

use serde::{Deserialize, Serialize};

use crate::control::AgentSetup;
use crate::error::{Error, Result};
use crate::world::{RenderConfig, SceneGenConfig};

pub use episode::{
    derive_seed, prepare_episode, required_classes, run_episode, run_prepared, Driver,
    EpisodeResult, EpisodeSpec, FailureTag, PreparedEpisode, StepSink, SubgoalOutcome,
    WARMUP_TURNS,
};
pub use metrics::{failure_counts, metrics, Metrics};
pub use report::{
    ablation_csv, read_results_csv, results_csv, summarize, write_ablation_report,
    write_suite_report, ResultRow, SuiteSummary,
};
pub use suite::{
    build_suite, episodes_for_tasks, prepare_all, requires_openable, run_ablation_matrix,
    run_suite, sample_task, sample_tasks, AblationReport, ModeDelta, ModeReport, SuiteConfig,
};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "DISCO_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub scene: SceneGenConfig,
    pub render: RenderConfig,
    pub agent: AgentSetup,
    /// Primitive steps allowed per episode, warm-up included.
    pub budget: usize,
    /// Scene seeds tried per episode before giving up.
    pub scene_retries: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            scene: SceneGenConfig::default(),
            render: RenderConfig::default(),
            agent: AgentSetup::default(),
            budget: 1500,
            scene_retries: 32,
        }
    }
}

/// Thread cap from `DISCO_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
    }
}

/// A worker pool with at most `threads` threads; `None` uses rayon's default.
pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}
