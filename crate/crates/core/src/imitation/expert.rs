//! Full-knowledge expert: interactable poses, short-horizon labels and
//! optimal solutions of whole subgoal plans.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::control::{interaction_program, FineAction};
use crate::error::{Error, Result};
use crate::planner::{Noun, Subgoal, Verb};
use crate::world::{
    check_interactable, navigate, Action, AffordanceMask, AgentState, GridScene, ObjectId,
    Placement, RenderConfig, World, Yaw, HORIZON_MAX, HORIZON_MIN, HORIZON_STEP,
};

const N_HORIZON: usize = ((HORIZON_MAX - HORIZON_MIN) / HORIZON_STEP + 1) as usize;

/// Dense index over every `(x, z, yaw, horizon)` pose of a scene.
#[derive(Debug, Clone, Copy)]
pub struct PoseIndex {
    pub width: i32,
    pub height: i32,
}

impl PoseIndex {
    pub fn new(scene: &GridScene) -> Self {
        PoseIndex {
            width: scene.width,
            height: scene.height,
        }
    }

    pub fn len(&self) -> usize {
        (self.width * self.height) as usize * 4 * N_HORIZON
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, a: &AgentState) -> usize {
        let h = ((a.horizon - HORIZON_MIN) / HORIZON_STEP) as usize;
        (((a.z * self.width + a.x) as usize * 4) + a.yaw.0 as usize) * N_HORIZON + h
    }

    pub fn state(&self, i: usize) -> AgentState {
        let h = (i % N_HORIZON) as i32;
        let rest = i / N_HORIZON;
        let yaw = Yaw((rest % 4) as u8);
        let cell = (rest / 4) as i32;
        let mut a = AgentState::new(cell % self.width, cell / self.width, yaw);
        a.horizon = HORIZON_MIN + h * HORIZON_STEP;
        a
    }

    /// Every pose on a navigable cell.
    pub fn poses<'a>(&self, scene: &'a GridScene) -> impl Iterator<Item = AgentState> + 'a {
        let idx = *self;
        (0..self.len())
            .map(move |i| idx.state(i))
            .filter(move |a| scene.is_navigable(a.x, a.z))
    }
}

/// The verb used to label an object: the first of PickUp, Open, ToggleOn
/// and Put that its current affordances allow.
pub fn default_verb(scene: &GridScene, id: ObjectId) -> Option<Action> {
    let aff = scene.objects[id as usize].current_affordance();
    if aff.contains(AffordanceMask::PICKUPABLE) {
        Some(Action::PickUp(id))
    } else if aff.contains(AffordanceMask::OPENABLE) {
        Some(Action::Open(id))
    } else if aff.contains(AffordanceMask::TOGGLEABLE_ON) {
        Some(Action::ToggleOn(id))
    } else if aff.contains(AffordanceMask::RECEPTACLE) {
        Some(Action::Put(id))
    } else {
        None
    }
}

/// Poses from which an interaction with `id` succeeds as far as the pose
/// is concerned: in reach, not shut away, and visible.
///
/// The verb is only checked for applicability; hand contents are not part
/// of the predicate.
pub fn expert_interactable_states(
    scene: &GridScene,
    id: ObjectId,
    verb: &Action,
    cfg: &RenderConfig,
) -> Result<Vec<AgentState>> {
    let obj = scene.object(id).ok_or(Error::NoInteractableState(id))?;
    if obj.placement == Placement::Held || verb.target() != Some(id) {
        return Err(Error::NoInteractableState(id));
    }
    let states: Vec<AgentState> = PoseIndex::new(scene)
        .poses(scene)
        .filter(|a| check_interactable(scene, a, id, cfg).is_ok())
        .collect();
    if states.is_empty() {
        return Err(Error::NoInteractableState(id));
    }
    Ok(states)
}

/// One labelled short-horizon state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertLabel {
    pub state: AgentState,
    pub object: ObjectId,
    pub action: FineAction,
    pub steps_to_interaction: usize,
}

/// Label every pose within `radius` fine actions of an interactable pose
/// with the first action of a shortest path there.
///
/// Distances grow one layer at a time from the interactable set, each
/// layer collecting the poses with some action into the previous one; the
/// label is the first such action in [`FineAction`] order.
pub fn expert_label_short_horizon(
    scene: &GridScene,
    id: ObjectId,
    verb: &Action,
    radius: usize,
    cfg: &RenderConfig,
) -> Result<Vec<ExpertLabel>> {
    let goals = expert_interactable_states(scene, id, verb, cfg)?;
    let idx = PoseIndex::new(scene);
    let mut dist: Vec<Option<usize>> = vec![None; idx.len()];
    for g in &goals {
        dist[idx.index(g)] = Some(0);
    }
    let poses: Vec<AgentState> = idx.poses(scene).collect();
    let moves: Vec<(FineAction, Action)> = FineAction::LABEL_ORDER
        .iter()
        .filter_map(|&f| f.to_action().map(|a| (f, a)))
        .collect();
    let mut labels: Vec<ExpertLabel> = goals
        .iter()
        .map(|g| ExpertLabel {
            state: *g,
            object: id,
            action: FineAction::Interact,
            steps_to_interaction: 0,
        })
        .collect();
    for d in 1..=radius {
        let mut layer = Vec::new();
        for p in &poses {
            if dist[idx.index(p)].is_some() {
                continue;
            }
            for &(f, a) in &moves {
                let Ok(next) = navigate(scene, p, &a) else {
                    continue;
                };
                if dist[idx.index(&next)] == Some(d - 1) {
                    layer.push(ExpertLabel {
                        state: *p,
                        object: id,
                        action: f,
                        steps_to_interaction: d,
                    });
                    break;
                }
            }
        }
        for l in &layer {
            dist[idx.index(&l.state)] = Some(d);
        }
        labels.extend(layer);
    }
    labels.sort_by_key(|l| idx.index(&l.state));
    Ok(labels)
}

/// Prepare a world copy in which `verb` can succeed from a good pose:
/// for `Put` a throwaway object is placed in the agent's hand.
pub fn rollout_world(scene: &GridScene, verb: &Action, cfg: &RenderConfig) -> World {
    let mut s = scene.clone();
    let mut agent = s.agent_start;
    if let Action::Put(_) = verb {
        let pickable = (0..s.catalog.len()).find(|&c| {
            s.catalog
                .get(c)
                .affordances
                .contains(AffordanceMask::PICKUPABLE)
        });
        if let Some(c) = pickable {
            let h = s.add_object(c, Placement::Held);
            agent.held = Some(h);
        }
    }
    let mut w = World::new(s, cfg.clone());
    w.agent = agent;
    w
}

/// Follow the labels from `start` and then interact. Returns the number of
/// fine actions executed before a successful interaction, or `None`.
pub fn rollout_labels(
    world: &World,
    labels: &HashMap<usize, FineAction>,
    start: &AgentState,
    verb: &Action,
) -> Option<usize> {
    let idx = PoseIndex::new(&world.scene);
    let mut w = world.clone();
    w.agent = AgentState {
        held: w.agent.held,
        ..*start
    };
    for steps in 0..=64 {
        match labels.get(&idx.index(&w.agent))? {
            FineAction::Interact => return w.step(verb).success.then_some(steps),
            f => {
                if !w.step(&f.to_action()?).success {
                    return None;
                }
            }
        }
    }
    None
}

/// Actions and primitive step count of the expert solving a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertRun {
    pub actions: Vec<Action>,
    pub steps: usize,
}

/// Shortest primitive navigation from the agent's pose to any pose
/// accepted by `goal`.
fn navigate_to(world: &World, goal: impl Fn(&AgentState) -> bool) -> Option<Vec<Action>> {
    let idx = PoseIndex::new(&world.scene);
    let start = world.agent;
    if goal(&start) {
        return Some(Vec::new());
    }
    let mut parent: Vec<Option<(usize, Action)>> = vec![None; idx.len()];
    let mut seen = vec![false; idx.len()];
    seen[idx.index(&start)] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        for a in Action::NAVIGATION {
            let Ok(n) = navigate(&world.scene, &s, &a) else {
                continue;
            };
            let k = idx.index(&n);
            if seen[k] {
                continue;
            }
            seen[k] = true;
            parent[k] = Some((idx.index(&s), a));
            if goal(&n) {
                let mut plan = vec![];
                let mut cur = k;
                while let Some((p, pa)) = parent[cur] {
                    plan.push(pa);
                    cur = p;
                }
                plan.reverse();
                return Some(plan);
            }
            queue.push_back(n);
        }
    }
    None
}

fn candidates(world: &World, subgoal: &Subgoal, placed: &[ObjectId]) -> Vec<ObjectId> {
    let scene = &world.scene;
    let classes: Vec<usize> = match &subgoal.noun {
        Noun::Class(n) => scene.catalog.id(n).into_iter().collect(),
        Noun::AnySurface => scene.catalog.surfaces().collect(),
    };
    scene
        .objects
        .iter()
        .filter(|o| {
            classes.contains(&o.class_id)
                && o.placement != Placement::Held
                && !placed.contains(&o.id)
        })
        .map(|o| o.id)
        .collect()
}

/// Solve a subgoal plan with full knowledge of the scene, executing in
/// `world`. Each subgoal goes to the instance with the shortest approach
/// and runs the same interaction program as the agent.
pub fn expert_solve(world: &mut World, plan: &[Subgoal]) -> Result<ExpertRun> {
    let mut actions = Vec::new();
    let mut placed: Vec<ObjectId> = Vec::new();
    for sg in plan {
        if sg.verb == Verb::GotoLocation {
            continue;
        }
        let skip = if sg.verb == Verb::PickUp {
            placed.clone()
        } else {
            Vec::new()
        };
        let mut best: Option<(Vec<Action>, Vec<Action>)> = None;
        for id in candidates(world, sg, &skip) {
            let aff = world.scene.objects[id as usize].current_affordance();
            let Some(program) =
                interaction_program(sg.verb, id, aff, world.agent.held, true, false)
            else {
                continue;
            };
            let cfg = world.render.clone();
            let scene = &world.scene;
            let Some(path) = navigate_to(world, |a| check_interactable(scene, a, id, &cfg).is_ok())
            else {
                continue;
            };
            let cost: usize = path.len();
            if best.as_ref().is_none_or(|(p, _)| cost < p.len()) {
                best = Some((path, program));
            }
        }
        let (path, program) = best.ok_or(Error::Unreachable)?;
        let held_before = world.agent.held;
        for a in path.iter().chain(&program) {
            if !world.step(a).success {
                return Err(Error::Unreachable);
            }
            actions.push(*a);
        }
        if let (Some(h), None) = (held_before, world.agent.held) {
            placed.push(h);
        }
    }
    let steps = actions.iter().map(|a| a.primitive_len()).sum();
    Ok(ExpertRun { actions, steps })
}
