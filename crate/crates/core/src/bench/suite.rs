//! Seeded suites of episodes and the paired ablation matrix.

use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{
    derive_seed, prepare_episode, run_prepared, Driver, EpisodeResult, EpisodeSpec, PreparedEpisode,
};
use super::metrics::{failure_counts, metrics, Metrics};
use super::render::MapRenderer;
use super::BenchConfig;
use crate::control::{AblationMode, PolicyParams};
use crate::error::{Error, Result};
use crate::planner::{TaskSpec, TaskType, FRIDGE, KNIFE, MICROWAVE, SINK_BASIN};
use crate::world::{AffordanceMask, ApplianceEffect, Catalog, ClassKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub episodes: usize,
    pub seed: u64,
    /// Chance that a task on a sliceable object also asks for slicing.
    pub slice_fraction: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            episodes: 100,
            seed: 0,
            slice_fraction: 0.15,
        }
    }
}

fn names(catalog: &Catalog, keep: impl Fn(&crate::world::ClassInfo) -> bool) -> Vec<&str> {
    catalog
        .classes
        .iter()
        .filter(|c| keep(c))
        .map(|c| c.name.as_str())
        .collect()
}

/// Draw a valid task of the given type.
pub fn sample_task<R: Rng>(
    task_type: TaskType,
    catalog: &Catalog,
    slice_fraction: f64,
    rng: &mut R,
) -> Result<TaskSpec> {
    let small = |c: &crate::world::ClassInfo| c.kind == ClassKind::Small;
    let objects = names(catalog, |c| {
        small(c)
            && c.affordances.contains(AffordanceMask::PICKUPABLE)
            && !c.affordances.contains(AffordanceMask::RECEPTACLE)
            && !c.slicer
    });
    let movables = names(catalog, |c| {
        small(c)
            && c.affordances
                .contains(AffordanceMask::RECEPTACLE | AffordanceMask::PICKUPABLE)
    });
    let fixed_receptacles = names(catalog, |c| {
        c.kind == ClassKind::Fixed && c.affordances.contains(AffordanceMask::RECEPTACLE)
    });
    let lights = names(catalog, |c| c.effect == Some(ApplianceEffect::Light));
    let pick = |pool: &[&str], rng: &mut R, what: &str| {
        pool.choose(rng)
            .map(|s| s.to_string())
            .ok_or_else(|| Error::InvalidSpec(format!("catalog has no {what}")))
    };
    let receptacle_except = |avoid: &str, rng: &mut R| {
        let pool: Vec<&str> = fixed_receptacles
            .iter()
            .copied()
            .filter(|&r| r != avoid)
            .collect();
        pick(&pool, rng, "receptacle")
    };
    let object = pick(&objects, rng, "pickupable object")?;
    let mut task = match task_type {
        TaskType::LookExamine => TaskSpec::new(task_type, &object, &pick(&lights, rng, "light")?),
        TaskType::PickPlace | TaskType::PlaceTwo => {
            TaskSpec::new(task_type, &object, &receptacle_except("", rng)?)
        }
        TaskType::Stack => {
            let m = pick(&movables, rng, "movable receptacle")?;
            TaskSpec::new(task_type, &object, &receptacle_except("", rng)?).with_movable(&m)
        }
        TaskType::HeatPlace => {
            TaskSpec::new(task_type, &object, &receptacle_except(MICROWAVE, rng)?)
        }
        TaskType::CoolPlace => TaskSpec::new(task_type, &object, &receptacle_except(FRIDGE, rng)?),
        TaskType::CleanPlace => {
            TaskSpec::new(task_type, &object, &receptacle_except(SINK_BASIN, rng)?)
        }
    };
    let sliceable = catalog.id(&object).is_some_and(|c| {
        catalog
            .get(c)
            .affordances
            .contains(AffordanceMask::SLICEABLE)
    });
    let slice_ok =
        !matches!(task_type, TaskType::PlaceTwo | TaskType::Stack) && catalog.id(KNIFE).is_some();
    if sliceable && slice_ok && rng.gen::<f64>() < slice_fraction {
        task = task.sliced();
    }
    task.validate(catalog)?;
    Ok(task)
}

/// Seeded tasks cycling through every task type.
pub fn sample_tasks(
    n: usize,
    seed: u64,
    slice_fraction: f64,
    catalog: &Catalog,
) -> Result<Vec<TaskSpec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            sample_task(
                TaskType::ALL[i % TaskType::ALL.len()],
                catalog,
                slice_fraction,
                &mut rng,
            )
        })
        .collect()
}

/// Episode seeds for a list of tasks: task `i` gets child seed `i` of the
/// master seed.
pub fn episodes_for_tasks(tasks: &[TaskSpec], master: u64) -> Vec<EpisodeSpec> {
    tasks
        .iter()
        .enumerate()
        .map(|(i, t)| EpisodeSpec {
            seed: derive_seed(master, i as u64),
            task: t.clone(),
        })
        .collect()
}

/// Prepare every episode in parallel, keeping the input order.
pub fn prepare_all(
    specs: &[EpisodeSpec],
    cfg: &BenchConfig,
    catalog: Arc<Catalog>,
) -> Result<Vec<PreparedEpisode>> {
    specs
        .par_iter()
        .map(|s| prepare_episode(s, cfg, catalog.clone()))
        .collect()
}

/// Salt separating the task-drawing streams from the scene seeds.
const TASK_STREAM: u64 = 0x7461_736b;

/// A seeded suite spanning all task types. Slot `i` runs with episode seed
/// `derive_seed(seed, i)`, the same seed [`episodes_for_tasks`] assigns, so
/// writing the suite's tasks to a file and running that file with the same
/// seed reproduces it. A task with no solvable scene is redrawn.
pub fn build_suite(
    suite: &SuiteConfig,
    cfg: &BenchConfig,
    catalog: Arc<Catalog>,
) -> Result<Vec<PreparedEpisode>> {
    let slots: Vec<usize> = (0..suite.episodes).collect();
    slots
        .par_iter()
        .map(|&i| {
            let task_type = TaskType::ALL[i % TaskType::ALL.len()];
            let seed = derive_seed(suite.seed, i as u64);
            for redraw in 0..16u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed ^ TASK_STREAM, redraw));
                let task = sample_task(task_type, &catalog, suite.slice_fraction, &mut rng)?;
                match prepare_episode(&EpisodeSpec { seed, task }, cfg, catalog.clone()) {
                    Ok(p) => return Ok(p),
                    Err(Error::NoSolvableScene(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::NoSolvableScene(format!("suite slot {i}")))
        })
        .collect()
}

/// Run every prepared episode with the same driver. With `render_dir`,
/// episode `i` writes its step renders under `render_dir/episode_{i}`.
pub fn run_suite(
    preps: &[PreparedEpisode],
    cfg: &BenchConfig,
    driver: Driver,
    policy: Option<&PolicyParams>,
    render_dir: Option<&Path>,
) -> Result<Vec<EpisodeResult>> {
    preps
        .par_iter()
        .enumerate()
        .map(|(i, p)| match render_dir {
            None => run_prepared(p, cfg, driver, policy, None),
            Some(dir) => {
                let mut renderer = MapRenderer::for_task(
                    &dir.join(format!("episode_{i:03}")),
                    &p.scene.catalog,
                    &p.spec.task,
                )?;
                let mut sink = |v: &crate::control::StepView| renderer.observe(v);
                let r = run_prepared(p, cfg, driver, policy, Some(&mut sink))?;
                renderer.finish()?;
                Ok(r)
            }
        })
        .collect()
}

/// Tasks whose plan needs a receptacle that has to be opened.
pub fn requires_openable(task: &TaskSpec, catalog: &Catalog) -> bool {
    let openable = |n: &str| {
        catalog.id(n).is_some_and(|c| {
            catalog
                .get(c)
                .affordances
                .contains(AffordanceMask::OPENABLE)
        })
    };
    matches!(task.task_type, TaskType::HeatPlace | TaskType::CoolPlace)
        || (task.task_type != TaskType::LookExamine && openable(&task.receptacle))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub mode: String,
    pub ablation: AblationMode,
    pub metrics: Metrics,
    pub failures: std::collections::BTreeMap<String, usize>,
    pub results: Vec<EpisodeResult>,
}

/// Difference `b - a` between two modes on the same episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeDelta {
    pub a: String,
    pub b: String,
    pub sr: f64,
    pub gc: f64,
    pub plwsr: f64,
    pub plwgc: f64,
    /// Episodes solved by `a` only.
    pub only_a: usize,
    /// Episodes solved by `b` only.
    pub only_b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub modes: Vec<ModeReport>,
    pub deltas: Vec<ModeDelta>,
}

impl AblationReport {
    pub fn mode(&self, name: &str) -> Option<&ModeReport> {
        self.modes.iter().find(|m| m.mode == name)
    }
}

fn delta(a: &ModeReport, b: &ModeReport) -> ModeDelta {
    let pairs = a.results.iter().zip(&b.results);
    ModeDelta {
        a: a.mode.clone(),
        b: b.mode.clone(),
        sr: b.metrics.sr - a.metrics.sr,
        gc: b.metrics.gc - a.metrics.gc,
        plwsr: b.metrics.plwsr - a.metrics.plwsr,
        plwgc: b.metrics.plwgc - a.metrics.plwgc,
        only_a: pairs
            .clone()
            .filter(|(x, y)| x.success && !y.success)
            .count(),
        only_b: pairs.filter(|(x, y)| !x.success && y.success).count(),
    }
}

/// Run each mode over the identical episodes and compare every pair. With
/// `render_dir`, each mode renders into its own subdirectory.
pub fn run_ablation_matrix(
    preps: &[PreparedEpisode],
    cfg: &BenchConfig,
    modes: &[AblationMode],
    policy: Option<&PolicyParams>,
    render_dir: Option<&Path>,
) -> Result<AblationReport> {
    let mut reports = Vec::with_capacity(modes.len());
    for &mode in modes {
        let dir = render_dir.map(|d| d.join(mode.name()));
        let results = run_suite(preps, cfg, Driver::Agent(mode), policy, dir.as_deref())?;
        reports.push(ModeReport {
            mode: mode.name().to_string(),
            ablation: mode,
            metrics: metrics(&results)?,
            failures: failure_counts(&results),
            results,
        });
    }
    let mut deltas = Vec::new();
    for i in 0..reports.len() {
        for j in i + 1..reports.len() {
            deltas.push(delta(&reports[i], &reports[j]));
        }
    }
    Ok(AblationReport {
        modes: reports,
        deltas,
    })
}
