//! Single episodes: scene preparation, the agent run and its outcome.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BenchConfig;
use crate::control::{run_subgoal, AblationMode, Agent, FailureKind, PolicyParams, StepView};
use crate::error::{Error, Result};
use crate::imitation::{expert_solve, ExpertRun};
use crate::planner::{plan_from_task, Subgoal, TaskSpec, TaskType, KNIFE};
use crate::world::{
    check_goal_conditions, generate_scene, Action, Catalog, ConditionReport, GridScene, World,
};

/// Panoramic turns performed before the first subgoal.
pub const WARMUP_TURNS: usize = 4;

/// A (seed, task) pair. The seed fixes the scene and every random choice
/// the agent makes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub seed: u64,
    pub task: TaskSpec,
}

/// Who drives the episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Driver {
    Agent(AblationMode),
    /// Replays the full-knowledge expert's actions.
    Expert,
}

impl Driver {
    pub fn name(&self) -> &'static str {
        match self {
            Driver::Agent(m) => m.name(),
            Driver::Expert => "expert",
        }
    }
}

/// Coarse reason an episode did not succeed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureTag {
    ObjectNotFound,
    Navigation,
    Interaction,
    /// The episode step budget ran out.
    BudgetExhausted,
    /// Every subgoal reported success but some goal condition is unmet.
    GoalNotMet,
    Unsupported,
    /// An internal error stopped the run.
    Error,
}

impl FailureTag {
    pub fn name(self) -> &'static str {
        match self {
            FailureTag::ObjectNotFound => "object-not-found",
            FailureTag::Navigation => "navigation",
            FailureTag::Interaction => "interaction",
            FailureTag::BudgetExhausted => "budget-exhausted",
            FailureTag::GoalNotMet => "goal-not-met",
            FailureTag::Unsupported => "unsupported",
            FailureTag::Error => "error",
        }
    }
}

impl From<FailureKind> for FailureTag {
    fn from(k: FailureKind) -> Self {
        match k {
            FailureKind::ObjectNotFound => FailureTag::ObjectNotFound,
            FailureKind::Navigation => FailureTag::Navigation,
            FailureKind::Interaction => FailureTag::Interaction,
            FailureKind::Unsupported => FailureTag::Unsupported,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgoalOutcome {
    pub subgoal: String,
    pub success: bool,
    pub failure: Option<FailureKind>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub seed: u64,
    pub scene_seed: u64,
    pub task: String,
    pub task_type: TaskType,
    pub driver: String,
    pub success: bool,
    pub conditions_met: usize,
    pub conditions_total: usize,
    /// Primitive steps taken, warm-up included.
    pub agent_steps: usize,
    /// Primitive steps of the expert on the same plan, warm-up included.
    pub expert_steps: usize,
    pub subgoals: Vec<SubgoalOutcome>,
    pub failure: Option<FailureTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EpisodeResult {
    pub fn goal_fraction(&self) -> f64 {
        if self.conditions_total == 0 {
            0.0
        } else {
            self.conditions_met as f64 / self.conditions_total as f64
        }
    }

    /// `L* / max(L*, L̂)`.
    pub fn path_weight(&self) -> f64 {
        let denom = self.expert_steps.max(self.agent_steps);
        if denom == 0 {
            1.0
        } else {
            self.expert_steps as f64 / denom as f64
        }
    }
}

/// A generated scene the expert can solve, with its plan and the expert's
/// solution.
#[derive(Debug, Clone)]
pub struct PreparedEpisode {
    pub spec: EpisodeSpec,
    pub scene_seed: u64,
    pub scene: GridScene,
    pub plan: Vec<Subgoal>,
    pub expert: ExpertRun,
}

impl PreparedEpisode {
    /// `L*`, warm-up included.
    pub fn expert_steps(&self) -> usize {
        WARMUP_TURNS + self.expert.steps
    }
}

/// Deterministic child seed number `index` of `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index.wrapping_add(1));
    rng.gen()
}

/// Small-object classes the scene must contain for `task`.
pub fn required_classes(task: &TaskSpec, catalog: &Catalog) -> Vec<String> {
    let mut out = vec![task.object.clone()];
    if task.task_type == TaskType::PlaceTwo {
        out.push(task.object.clone());
    }
    if let Some(m) = &task.movable_receptacle {
        out.push(m.clone());
    }
    if task.slice {
        out.push(KNIFE.to_string());
    }
    let small = |n: &str| {
        catalog
            .id(n)
            .is_some_and(|c| catalog.get(c).kind == crate::world::ClassKind::Small)
    };
    if small(&task.receptacle) {
        out.push(task.receptacle.clone());
    }
    out
}

/// Generate a scene for the episode. Scene seeds are derived from the
/// episode seed and retried until the goal starts unmet and the expert
/// solves the plan.
pub fn prepare_episode(
    spec: &EpisodeSpec,
    cfg: &BenchConfig,
    catalog: Arc<Catalog>,
) -> Result<PreparedEpisode> {
    spec.task.validate(&catalog)?;
    let plan = plan_from_task(&spec.task)?;
    let mut gen = cfg.scene.clone();
    gen.required_classes = required_classes(&spec.task, &catalog);
    for attempt in 0..cfg.scene_retries.max(1) {
        let scene_seed = derive_seed(spec.seed, attempt as u64);
        let Ok(scene) = generate_scene(&gen, catalog.clone(), scene_seed) else {
            continue;
        };
        if check_goal_conditions(&scene, &spec.task)?.satisfied() > 0 {
            continue;
        }
        let mut world = World::new(scene.clone(), cfg.render.clone());
        let Ok(expert) = expert_solve(&mut world, &plan) else {
            continue;
        };
        if !check_goal_conditions(&world.scene, &spec.task)?.all_met() {
            continue;
        }
        return Ok(PreparedEpisode {
            spec: spec.clone(),
            scene_seed,
            scene,
            plan,
            expert,
        });
    }
    Err(Error::NoSolvableScene(format!(
        "{} (seed {})",
        spec.task, spec.seed
    )))
}

/// Writes per-step map renders; see [`super::render`].
pub type StepSink<'a> = &'a mut dyn FnMut(&StepView);

/// Run a prepared episode.
///
/// A fine-enabled agent needs a trained policy; that is the only error
/// returned. Everything that goes wrong during the run becomes part of the
/// result.
pub fn run_prepared(
    prep: &PreparedEpisode,
    cfg: &BenchConfig,
    driver: Driver,
    policy: Option<&PolicyParams>,
    sink: Option<StepSink>,
) -> Result<EpisodeResult> {
    let mut result = EpisodeResult {
        seed: prep.spec.seed,
        scene_seed: prep.scene_seed,
        task: prep.spec.task.to_string(),
        task_type: prep.spec.task.task_type,
        driver: driver.name().to_string(),
        success: false,
        conditions_met: 0,
        conditions_total: 0,
        agent_steps: 0,
        expert_steps: prep.expert_steps(),
        subgoals: Vec::new(),
        failure: None,
        error: None,
    };
    let budget = cfg.budget;
    let world = World::new(prep.scene.clone(), cfg.render.clone());
    let final_scene = match driver {
        Driver::Expert => {
            let mut world = world;
            let mut steps = 0;
            for a in std::iter::repeat_n(Action::RotateRight, WARMUP_TURNS)
                .chain(prep.expert.actions.iter().copied())
            {
                if steps + a.primitive_len() > budget {
                    result.failure = Some(FailureTag::BudgetExhausted);
                    break;
                }
                world.step(&a);
                steps += a.primitive_len();
            }
            result.agent_steps = steps;
            world.scene
        }
        Driver::Agent(mode) => {
            if mode.fine && !policy.is_some_and(|p| p.trained) {
                return Err(Error::UntrainedPolicy);
            }
            let mut setup = cfg.agent.clone();
            setup.mode = mode;
            setup.seed = derive_seed(prep.spec.seed, u64::MAX);
            let mut agent = Agent::new(world, &setup, policy)?;
            if let Some(sink) = sink {
                agent.set_observer(move |view| sink(view));
            }
            run_agent(&mut agent, prep, cfg, &mut result);
            result.agent_steps = agent.steps;
            agent.world.scene
        }
    };
    score(&final_scene, &prep.spec.task, &mut result);
    Ok(result)
}

fn run_agent(
    agent: &mut Agent,
    prep: &PreparedEpisode,
    cfg: &BenchConfig,
    result: &mut EpisodeResult,
) {
    let budget = cfg.budget;
    for _ in 0..WARMUP_TURNS {
        if agent.steps >= budget {
            result.failure = Some(FailureTag::BudgetExhausted);
            return;
        }
        agent.execute(Action::RotateRight);
    }
    if check_goal_conditions(&agent.world.scene, &prep.spec.task).is_ok_and(|r| r.all_met()) {
        return;
    }
    for sg in &prep.plan {
        let remaining = budget.saturating_sub(agent.steps);
        if remaining == 0 {
            result.failure = Some(FailureTag::BudgetExhausted);
            return;
        }
        let sub_budget = remaining.min(cfg.agent.control.subgoal_budget);
        match run_subgoal(agent, sg, sub_budget) {
            Ok(r) => {
                result.subgoals.push(SubgoalOutcome {
                    subgoal: sg.to_string(),
                    success: r.success,
                    failure: r.failure,
                    steps: r.steps,
                });
                if !r.success {
                    let out_of_budget =
                        sub_budget < cfg.agent.control.subgoal_budget && agent.steps >= budget;
                    result.failure = Some(if out_of_budget {
                        FailureTag::BudgetExhausted
                    } else {
                        r.failure.map_or(FailureTag::Interaction, FailureTag::from)
                    });
                    return;
                }
            }
            Err(e) => {
                result.failure = Some(FailureTag::Error);
                result.error = Some(e.to_string());
                return;
            }
        }
    }
}

fn score(scene: &GridScene, task: &TaskSpec, result: &mut EpisodeResult) {
    match check_goal_conditions(scene, task) {
        Ok(report) => apply(report, result),
        Err(e) => {
            result.failure = Some(FailureTag::Error);
            result.error = Some(e.to_string());
        }
    }
}

fn apply(report: ConditionReport, result: &mut EpisodeResult) {
    result.conditions_met = report.satisfied();
    result.conditions_total = report.total();
    result.success = report.all_met();
    if result.success {
        result.failure = None;
    } else if result.failure.is_none() {
        result.failure = Some(FailureTag::GoalNotMet);
    }
}

/// Prepare and run one episode.
pub fn run_episode(
    spec: &EpisodeSpec,
    cfg: &BenchConfig,
    driver: Driver,
    policy: Option<&PolicyParams>,
    catalog: Arc<Catalog>,
) -> Result<EpisodeResult> {
    let prep = prepare_episode(spec, cfg, catalog)?;
    run_prepared(&prep, cfg, driver, policy, None)
}
