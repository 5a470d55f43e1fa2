//! Discrete action semantics.

use serde::{Deserialize, Serialize};

use super::catalog::{AffordanceMask, ApplianceEffect};
use super::render::{object_visible, render_egocentric, RenderConfig};
use super::scene::{
    AgentState, GridScene, ObjectId, Placement, CELL_SIZE, HORIZON_MAX, HORIZON_MIN, HORIZON_STEP,
};

/// Interaction distance between the agent cell center and the target's
/// supporting cell center, meters.
pub const REACH_DISTANCE: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action", content = "target")]
pub enum Action {
    MoveAhead,
    RotateRight,
    RotateLeft,
    LookUp,
    LookDown,
    MoveLeft,
    MoveRight,
    MoveBack,
    PickUp(ObjectId),
    Put(ObjectId),
    Open(ObjectId),
    Close(ObjectId),
    ToggleOn(ObjectId),
    ToggleOff(ObjectId),
    Slice(ObjectId),
}

impl Action {
    /// The five primitive navigation actions.
    pub const NAVIGATION: [Action; 5] = [
        Action::MoveAhead,
        Action::RotateRight,
        Action::RotateLeft,
        Action::LookUp,
        Action::LookDown,
    ];

    pub fn is_navigation(&self) -> bool {
        self.target().is_none()
    }

    pub fn target(&self) -> Option<ObjectId> {
        match *self {
            Action::PickUp(o)
            | Action::Put(o)
            | Action::Open(o)
            | Action::Close(o)
            | Action::ToggleOn(o)
            | Action::ToggleOff(o)
            | Action::Slice(o) => Some(o),
            _ => None,
        }
    }

    /// Primitive expansion of composed moves; other actions expand to
    /// themselves.
    pub fn expansion(&self) -> Vec<Action> {
        use Action::*;
        match self {
            MoveLeft => vec![RotateLeft, MoveAhead, RotateRight],
            MoveRight => vec![RotateRight, MoveAhead, RotateLeft],
            MoveBack => vec![RotateLeft, RotateLeft, MoveAhead, RotateRight, RotateRight],
            a => vec![*a],
        }
    }

    /// Number of primitive steps this action counts for in path lengths.
    pub fn primitive_len(&self) -> usize {
        self.expansion().len()
    }

    pub fn name(&self) -> &'static str {
        use Action::*;
        match self {
            MoveAhead => "MoveAhead",
            RotateRight => "RotateRight",
            RotateLeft => "RotateLeft",
            LookUp => "LookUp",
            LookDown => "LookDown",
            MoveLeft => "MoveLeft",
            MoveRight => "MoveRight",
            MoveBack => "MoveBack",
            PickUp(_) => "PickUp",
            Put(_) => "Put",
            Open(_) => "Open",
            Close(_) => "Close",
            ToggleOn(_) => "ToggleOn",
            ToggleOff(_) => "ToggleOff",
            Slice(_) => "Slice",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureReason {
    Collision,
    OutOfReach,
    AffordanceViolation,
    HandOccupied,
    ClosedReceptacle,
    NotVisible,
    HorizonLimit,
    NothingHeld,
    NoKnife,
    UnknownObject,
}

impl std::fmt::Display for FailureReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FailureReason::Collision => "collision",
            FailureReason::OutOfReach => "out-of-reach",
            FailureReason::AffordanceViolation => "affordance-violation",
            FailureReason::HandOccupied => "hand-occupied",
            FailureReason::ClosedReceptacle => "closed-receptacle",
            FailureReason::NotVisible => "not-visible",
            FailureReason::HorizonLimit => "horizon-limit",
            FailureReason::NothingHeld => "nothing-held",
            FailureReason::NoKnife => "no-knife",
            FailureReason::UnknownObject => "unknown-object",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepResult {
    pub success: bool,
    pub failure: Option<FailureReason>,
}

impl StepResult {
    pub fn ok() -> Self {
        StepResult {
            success: true,
            failure: None,
        }
    }

    pub fn fail(reason: FailureReason) -> Self {
        StepResult {
            success: false,
            failure: Some(reason),
        }
    }
}

impl From<Result<(), FailureReason>> for StepResult {
    fn from(r: Result<(), FailureReason>) -> Self {
        match r {
            Ok(()) => StepResult::ok(),
            Err(e) => StepResult::fail(e),
        }
    }
}

/// Euclidean distance in meters between the agent and the cell the object
/// rests in; `None` for held objects.
pub fn distance_to_object(scene: &GridScene, agent: &AgentState, id: ObjectId) -> Option<f64> {
    let (x, z) = scene.root_cell(id)?;
    let dx = (x - agent.x) as f64;
    let dz = (z - agent.z) as f64;
    Some((dx * dx + dz * dz).sqrt() * CELL_SIZE)
}

pub fn in_reach(scene: &GridScene, agent: &AgentState, id: ObjectId) -> bool {
    distance_to_object(scene, agent, id).is_some_and(|d| d <= REACH_DISTANCE + 1e-9)
}

/// Reach, access and visibility shared by every interactive action.
pub fn check_interactable(
    scene: &GridScene,
    agent: &AgentState,
    id: ObjectId,
    cfg: &RenderConfig,
) -> Result<(), FailureReason> {
    if !in_reach(scene, agent, id) {
        return Err(FailureReason::OutOfReach);
    }
    if !scene.is_reachable_content(id) {
        return Err(FailureReason::ClosedReceptacle);
    }
    if !object_visible(scene, agent, id, cfg) {
        return Err(FailureReason::NotVisible);
    }
    Ok(())
}

fn descendants(scene: &GridScene, id: ObjectId) -> Vec<ObjectId> {
    scene
        .objects
        .iter()
        .filter(|o| o.id != id && scene.is_within(o.id, id))
        .map(|o| o.id)
        .collect()
}

fn apply_effect(scene: &mut GridScene, id: ObjectId, effect: ApplianceEffect) {
    for d in descendants(scene, id) {
        let s = &mut scene.objects[d as usize].state;
        match effect {
            ApplianceEffect::Heat => s.is_heated = true,
            ApplianceEffect::Cool => s.is_cooled = true,
            ApplianceEffect::Clean => s.is_cleaned = true,
            ApplianceEffect::Light => {}
        }
    }
}

fn translate(
    scene: &GridScene,
    agent: &mut AgentState,
    delta: (i32, i32),
) -> Result<(), FailureReason> {
    let (nx, nz) = (agent.x + delta.0, agent.z + delta.1);
    if !scene.is_navigable(nx, nz) {
        return Err(FailureReason::Collision);
    }
    agent.x = nx;
    agent.z = nz;
    Ok(())
}

/// Pose after a navigation action, without touching the scene.
pub fn navigate(
    scene: &GridScene,
    agent: &AgentState,
    action: &Action,
) -> Result<AgentState, FailureReason> {
    let mut a = *agent;
    match *action {
        Action::MoveAhead => translate(scene, &mut a, agent.yaw.delta())?,
        Action::MoveLeft => translate(scene, &mut a, agent.yaw.left().delta())?,
        Action::MoveRight => translate(scene, &mut a, agent.yaw.right().delta())?,
        Action::MoveBack => translate(scene, &mut a, agent.yaw.back().delta())?,
        Action::RotateRight => a.yaw = agent.yaw.right(),
        Action::RotateLeft => a.yaw = agent.yaw.left(),
        Action::LookUp | Action::LookDown => {
            let h = agent.horizon
                + if *action == Action::LookDown {
                    HORIZON_STEP
                } else {
                    -HORIZON_STEP
                };
            if !(HORIZON_MIN..=HORIZON_MAX).contains(&h) {
                return Err(FailureReason::HorizonLimit);
            }
            a.horizon = h;
        }
        _ => return Err(FailureReason::AffordanceViolation),
    }
    Ok(a)
}

/// Apply one action. On failure neither the scene nor the agent changes.
pub fn step(
    scene: &mut GridScene,
    agent: &mut AgentState,
    action: &Action,
    cfg: &RenderConfig,
) -> StepResult {
    try_step(scene, agent, action, cfg).into()
}

fn try_step(
    scene: &mut GridScene,
    agent: &mut AgentState,
    action: &Action,
    cfg: &RenderConfig,
) -> Result<(), FailureReason> {
    use AffordanceMask as A;
    if let Some(id) = action.target() {
        if scene.object(id).is_none() {
            return Err(FailureReason::UnknownObject);
        }
    }
    if action.is_navigation() {
        *agent = navigate(scene, agent, action)?;
        return Ok(());
    }
    match *action {
        Action::PickUp(id) => {
            let obj = &scene.objects[id as usize];
            if !obj.affordance_flags.contains(A::PICKUPABLE) || obj.placement == Placement::Held {
                return Err(FailureReason::AffordanceViolation);
            }
            if agent.held.is_some() {
                return Err(FailureReason::HandOccupied);
            }
            check_interactable(scene, agent, id, cfg)?;
            scene.set_placement(id, Placement::Held);
            agent.held = Some(id);
            Ok(())
        }
        Action::Put(id) => {
            let Some(held) = agent.held else {
                return Err(FailureReason::NothingHeld);
            };
            let target = &scene.objects[id as usize];
            if !target.affordance_flags.contains(A::RECEPTACLE) || scene.is_within(id, held) {
                return Err(FailureReason::AffordanceViolation);
            }
            if !target.is_accessible() {
                return Err(FailureReason::ClosedReceptacle);
            }
            check_interactable(scene, agent, id, cfg)?;
            scene.set_placement(held, Placement::Inside(id));
            agent.held = None;
            Ok(())
        }
        Action::Open(id) | Action::Close(id) => {
            let opening = matches!(action, Action::Open(_));
            let obj = &scene.objects[id as usize];
            let want = if opening { A::OPENABLE } else { A::CLOSEABLE };
            if !obj.current_affordance().contains(want) {
                return Err(FailureReason::AffordanceViolation);
            }
            check_interactable(scene, agent, id, cfg)?;
            scene.objects[id as usize].state.is_open = opening;
            let effect = scene.catalog.get(scene.class_of(id)).effect;
            if !opening && effect == Some(ApplianceEffect::Cool) {
                apply_effect(scene, id, ApplianceEffect::Cool);
            }
            Ok(())
        }
        Action::ToggleOn(id) | Action::ToggleOff(id) => {
            let on = matches!(action, Action::ToggleOn(_));
            let obj = &scene.objects[id as usize];
            let want = if on {
                A::TOGGLEABLE_ON
            } else {
                A::TOGGLEABLE_OFF
            };
            if !obj.current_affordance().contains(want) {
                return Err(FailureReason::AffordanceViolation);
            }
            check_interactable(scene, agent, id, cfg)?;
            scene.objects[id as usize].state.is_toggled = on;
            match (scene.catalog.get(scene.class_of(id)).effect, on) {
                (Some(ApplianceEffect::Clean), true) => {
                    apply_effect(scene, id, ApplianceEffect::Clean)
                }
                (Some(ApplianceEffect::Heat), false) => {
                    apply_effect(scene, id, ApplianceEffect::Heat)
                }
                _ => {}
            }
            Ok(())
        }
        Action::Slice(id) => {
            let obj = &scene.objects[id as usize];
            if !obj.current_affordance().contains(A::SLICEABLE) || obj.placement == Placement::Held
            {
                return Err(FailureReason::AffordanceViolation);
            }
            let has_knife = agent
                .held
                .is_some_and(|h| scene.catalog.get(scene.class_of(h)).slicer);
            if !has_knife {
                return Err(FailureReason::NoKnife);
            }
            check_interactable(scene, agent, id, cfg)?;
            scene.objects[id as usize].state.is_sliced = true;
            Ok(())
        }
        Action::MoveAhead
        | Action::MoveLeft
        | Action::MoveRight
        | Action::MoveBack
        | Action::RotateRight
        | Action::RotateLeft
        | Action::LookUp
        | Action::LookDown => unreachable!("navigation is handled by navigate"),
    }
}

/// A scene and the agent acting in it, stepped together.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub scene: GridScene,
    pub agent: AgentState,
    pub render: RenderConfig,
}

impl World {
    /// Place the agent at the scene's start pose.
    pub fn new(scene: GridScene, render: RenderConfig) -> Self {
        let agent = scene.agent_start;
        World {
            scene,
            agent,
            render,
        }
    }

    pub fn step(&mut self, action: &Action) -> StepResult {
        step(&mut self.scene, &mut self.agent, action, &self.render)
    }

    pub fn frame(&self) -> super::render::EgoFrame {
        render_egocentric(&self.scene, &self.agent, &self.render)
    }

    /// Whether `action` would succeed, without changing anything.
    pub fn would_succeed(&self, action: &Action) -> bool {
        let mut scene = self.scene.clone();
        let mut agent = self.agent;
        step(&mut scene, &mut agent, action, &self.render).success
    }
}
