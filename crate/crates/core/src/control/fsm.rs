use serde::{Deserialize, Serialize};

use super::agent::{Agent, TraceEvent};
use super::bfs::{bfs_plan, face_target};
use super::features::{fine_features, FineTarget};
use super::interact::interaction_program;
use super::policy::{ranked_actions, FineAction};
use super::targets::verb_affordance;
use crate::error::Result;
use crate::mapping::{update_pose, PoseEstimate};
use crate::planner::{Noun, Subgoal, Verb};
use crate::world::{
    Action, ClassId, FailureReason, ObjectId, StepResult, HORIZON_MAX, HORIZON_MIN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    RandomWalk,
    Coarse,
    Align,
    Fine,
    Interact,
}

/// Why a subgoal was abandoned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    /// The target class never showed up in the map.
    ObjectNotFound,
    /// The step budget ran out while moving toward a localized target.
    Navigation,
    /// Every attempt ended in a failed interaction.
    Interaction,
    /// The subgoal could not even be attempted.
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgoalResult {
    pub subgoal: Subgoal,
    pub success: bool,
    pub failure: Option<FailureKind>,
    /// Last simulator failure seen during an interaction attempt.
    pub last_failure: Option<FailureReason>,
    pub steps: usize,
    pub attempts: usize,
}

struct Program {
    target: ObjectId,
    actions: Vec<Action>,
    cursor: usize,
}

struct State {
    phase: Phase,
    attempts: usize,
    walk: Vec<Action>,
    /// Walk one full segment before re-localizing (retry without coarse control).
    walk_first: bool,
    target: Option<(usize, ClassId)>,
    excluded: Vec<usize>,
    fine_steps: usize,
    /// Poses of the current fine attempt.
    fine_visited: Vec<PoseKey>,
    /// Turns spent looking around for a target that is not in view.
    scan_turns: usize,
    program: Option<Program>,
    ever_localized: bool,
    last_failure: Option<FailureReason>,
}

type PoseKey = (i32, i32, i32, i32);

fn pose_key(p: &PoseEstimate) -> PoseKey {
    let (x, z) = p.cell_offset();
    (x, z, p.yaw.rem_euclid(360), p.horizon)
}

fn in_horizon_range(h: i32) -> bool {
    (HORIZON_MIN..=HORIZON_MAX).contains(&h)
}

fn resolve_classes(agent: &Agent, noun: &Noun) -> Vec<ClassId> {
    match noun {
        Noun::Class(name) => agent.catalog.id(name).into_iter().collect(),
        Noun::AnySurface => agent.catalog.surfaces().collect(),
    }
}

fn set_phase(agent: &mut Agent, st: &mut State, phase: Phase, label: &str) {
    if st.phase != phase {
        st.phase = phase;
        let step = agent.steps;
        agent.record(|| TraceEvent::Phase {
            step,
            subgoal: label.to_string(),
            phase,
        });
    }
}

/// Run one subgoal until it succeeds, exhausts its attempts or uses up
/// `budget` primitive steps.
pub fn run_subgoal(agent: &mut Agent, subgoal: &Subgoal, budget: usize) -> Result<SubgoalResult> {
    let label = subgoal.to_string();
    let start = agent.steps;
    let classes = resolve_classes(agent, &subgoal.noun);
    let affordance = verb_affordance(subgoal.verb)
        .filter(|_| agent.mode.interactive_affordance)
        .map(|a| agent.catalog.affordance_index(a));
    let finish = |agent: &mut Agent, st: &State, success: bool, failure: Option<FailureKind>| {
        let step = agent.steps;
        agent.current_target = None;
        agent.record(|| TraceEvent::Subgoal {
            step,
            subgoal: label.clone(),
            success,
        });
        Ok(SubgoalResult {
            subgoal: subgoal.clone(),
            success,
            failure,
            last_failure: st.last_failure,
            steps: agent.steps - start,
            attempts: st.attempts,
        })
    };
    let mut st = State {
        phase: Phase::RandomWalk,
        attempts: 0,
        walk: Vec::new(),
        walk_first: false,
        target: None,
        excluded: Vec::new(),
        fine_steps: 0,
        fine_visited: Vec::new(),
        scan_turns: 0,
        program: None,
        ever_localized: false,
        last_failure: None,
    };
    if classes.is_empty() {
        return finish(agent, &st, false, Some(FailureKind::Unsupported));
    }
    let retries = agent.control.retries.max(1);

    loop {
        if st.attempts >= retries {
            return finish(agent, &st, false, Some(FailureKind::Interaction));
        }
        if agent.steps - start >= budget {
            let kind = match (st.ever_localized, st.phase) {
                (false, _) => FailureKind::ObjectNotFound,
                (true, Phase::RandomWalk | Phase::Coarse) => FailureKind::Navigation,
                _ => FailureKind::Interaction,
            };
            return finish(agent, &st, false, Some(kind));
        }
        match st.phase {
            Phase::RandomWalk => {
                let detected = classes.iter().any(|&c| agent.seen_classes[c]);
                if !st.walk_first && detected {
                    if let Some((t, class)) = agent.locate(&classes, affordance, &st.excluded) {
                        st.target = Some((t.target_grid, class));
                        st.ever_localized = true;
                        st.walk.clear();
                        agent.current_target = Some(t.target_grid);
                        let step = agent.steps;
                        let name = agent.catalog.name(class).to_string();
                        agent.record(|| TraceEvent::Target {
                            step,
                            grid: t.target_grid,
                            class: name,
                            source: t.source,
                        });
                        let next = if agent.mode.coarse {
                            Phase::Coarse
                        } else {
                            Phase::Align
                        };
                        set_phase(agent, &mut st, next, &label);
                        continue;
                    }
                }
                if st.walk.is_empty() {
                    st.walk = agent.random_walk_plan();
                    st.walk.reverse();
                }
                let a = st.walk.pop().expect("walk plan is never empty");
                if !agent.execute(a).success {
                    st.walk.clear();
                }
                if st.walk.is_empty() {
                    st.walk_first = false;
                    // Grids ruled out before this segment get another chance:
                    // spurious evidence has usually been seen again and faded.
                    st.excluded.clear();
                }
            }
            Phase::Coarse => {
                let (grid, class) = st.target.expect("coarse phase has a target");
                if !agent.still_localized(class, grid) {
                    match agent.locate(&classes, affordance, &st.excluded) {
                        Some((t, c)) => {
                            st.target = Some((t.target_grid, c));
                            agent.current_target = Some(t.target_grid);
                        }
                        None => {
                            st.target = None;
                            agent.current_target = None;
                            set_phase(agent, &mut st, Phase::RandomWalk, &label);
                        }
                    }
                    continue;
                }
                let nav = agent.nav_map();
                // Each failed attempt halves the approach radius.
                let radius = (super::targets::DESTINATION_RADIUS >> st.attempts.min(8)).max(1);
                let dest = super::targets::destination_set(agent.map.m, grid, radius);
                match bfs_plan(&nav, agent.agent_grid(), agent.yaw(), &dest) {
                    Ok(plan) if plan.is_empty() => set_phase(agent, &mut st, Phase::Align, &label),
                    Ok(plan) => {
                        agent.execute(plan[0]);
                    }
                    Err(_) => {
                        st.excluded.push(grid);
                        st.target = None;
                        agent.current_target = None;
                        set_phase(agent, &mut st, Phase::RandomWalk, &label);
                    }
                }
            }
            Phase::Align => {
                let (grid, _) = st.target.expect("align phase has a target");
                let target_cell = agent.map.offset_of(grid);
                let turns = face_target(&agent.pose, agent.pose.cell_offset(), target_cell);
                if let Some(&a) = turns.first() {
                    agent.execute(a);
                    continue;
                }
                if subgoal.verb == Verb::GotoLocation {
                    return finish(agent, &st, true, None);
                }
                st.fine_steps = 0;
                let next = if agent.mode.fine {
                    Phase::Fine
                } else {
                    Phase::Interact
                };
                set_phase(agent, &mut st, next, &label);
            }
            Phase::Fine => {
                if st.fine_steps >= agent.control.fine_steps {
                    fail_attempt(agent, &mut st, None, &label);
                    continue;
                }
                let (grid, class) = st.target.expect("fine phase has a target");
                let nav = agent.nav_map();
                let target = FineTarget {
                    cell: agent.map.offset_of(grid),
                    class,
                    top: agent.target_top(grid, class),
                };
                let x = fine_features(
                    &agent.frame,
                    &agent.pose,
                    &target,
                    &agent.surroundings(&nav, grid),
                );
                let policy = agent.policy.ok_or(crate::Error::UntrainedPolicy)?;
                if st.fine_steps == 0 {
                    st.fine_visited.clear();
                    st.scan_turns = 0;
                    st.fine_visited.push(pose_key(&agent.pose));
                }
                // Best-ranked action that does not lead back to a pose of this attempt.
                let ranked = ranked_actions(&x, class, policy)?;
                let a = ranked
                    .iter()
                    .copied()
                    .find(|a| match a.to_action() {
                        None => true,
                        Some(action) => {
                            let next =
                                pose_key(&update_pose(&agent.pose, &action, &StepResult::ok()));
                            in_horizon_range(next.3) && !st.fine_visited.contains(&next)
                        }
                    })
                    .unwrap_or(FineAction::Interact);
                st.fine_steps += 1;
                match a.to_action() {
                    Some(action) => {
                        agent.execute(action);
                        st.fine_visited.push(pose_key(&agent.pose));
                    }
                    None => {
                        debug_assert_eq!(a, FineAction::Interact);
                        set_phase(agent, &mut st, Phase::Interact, &label);
                    }
                }
            }
            Phase::Interact => {
                let (grid, class) = st.target.expect("interact phase has a target");
                if st.program.as_ref().is_none_or(|p| p.cursor == 0) {
                    let skip: Vec<ObjectId> = if subgoal.verb == Verb::PickUp {
                        agent.placed_ids.clone()
                    } else {
                        Vec::new()
                    };
                    let Some((id, aff)) =
                        agent.pick_instance(class, grid, &skip, (st.scan_turns > 0).then_some(2))
                    else {
                        if st.scan_turns < 3 {
                            st.scan_turns += 1;
                            agent.execute(Action::RotateRight);
                            continue;
                        }
                        // Nothing of the class anywhere around: the map evidence
                        // was spurious, so drop the grid and look elsewhere.
                        st.scan_turns = 0;
                        st.last_failure = Some(FailureReason::NotVisible);
                        st.excluded.push(grid);
                        st.target = None;
                        st.fine_steps = 0;
                        agent.current_target = None;
                        set_phase(agent, &mut st, Phase::RandomWalk, &label);
                        continue;
                    };
                    let gated = agent.mode.interactive_affordance;
                    let close = agent.control.close_after_put;
                    match interaction_program(subgoal.verb, id, aff, agent.held, gated, close) {
                        Some(actions) => {
                            st.program = Some(Program {
                                target: id,
                                actions,
                                cursor: 0,
                            })
                        }
                        None => return finish(agent, &st, false, Some(FailureKind::Unsupported)),
                    }
                }
                let prog = st.program.as_mut().expect("program built above");
                let action = prog.actions[prog.cursor];
                let target_id = prog.target;
                let r = agent.execute(action);
                if !r.success {
                    fail_attempt(agent, &mut st, r.failure, &label);
                    continue;
                }
                let prog = st.program.as_mut().expect("program still present");
                prog.cursor += 1;
                let done = prog.cursor == prog.actions.len();
                note_effect(agent, action, target_id, grid, class);
                if done {
                    st.program = None;
                    return finish(agent, &st, true, None);
                }
            }
        }
    }
}

/// Track what the agent now holds and where it moved objects.
fn note_effect(agent: &mut Agent, action: Action, _target: ObjectId, grid: usize, class: ClassId) {
    match action {
        Action::PickUp(id) => {
            let c = agent.world.scene.class_of(id);
            if agent.placed_ids.contains(&id) {
                agent.placed_ids.retain(|&p| p != id);
            } else if c == class {
                agent.moved.push((c, grid));
            }
            agent.held = Some(id);
        }
        Action::Put(_) => {
            if let Some(h) = agent.held.take() {
                let c = agent.world.scene.class_of(h);
                agent.moved.push((c, grid));
                agent.placed_ids.push(h);
            }
        }
        _ => {}
    }
}

fn fail_attempt(agent: &mut Agent, st: &mut State, reason: Option<FailureReason>, label: &str) {
    st.attempts += 1;
    st.fine_steps = 0;
    if reason.is_some() {
        st.last_failure = reason;
    }
    if let Some(p) = st.program.as_ref() {
        if p.cursor == 0 {
            st.program = None;
        }
    }
    if agent.mode.coarse {
        set_phase(agent, st, Phase::Coarse, label);
    } else {
        st.walk_first = true;
        st.walk.clear();
        set_phase(agent, st, Phase::RandomWalk, label);
    }
}
