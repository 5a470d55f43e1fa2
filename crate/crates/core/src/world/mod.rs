//! Deterministic grid-world household simulator.
//!
//! A room of 0.25 m cells holds furniture, appliances and small objects.
//! The agent moves in whole cells and quarter turns, tilts its camera in
//! 15 degree steps and manipulates objects it can see within reach.

pub mod catalog;
pub mod gen;
pub mod goals;
pub mod io;
pub mod render;
pub mod scene;
pub mod step;

pub use catalog::{
    Affordance, AffordanceMask, ApplianceEffect, Catalog, ClassId, ClassInfo, ClassKind,
};
pub use gen::{flood_fill, generate_scene, is_connected, SceneGenConfig};
pub use goals::{check_goal_conditions, Condition, ConditionReport};
pub use io::{load_scene, save_scene, scene_from_json, scene_to_json};
pub use render::{
    object_visible, render_egocentric, EgoFrame, FreeSample, NoiseModel, Ray, RayHit, RenderConfig,
};
pub use scene::{
    AgentState, CellKind, GridScene, ObjectId, ObjectInstance, ObjectState, Placement, Yaw,
    CELL_SIZE, HORIZON_MAX, HORIZON_MIN, HORIZON_STEP, INITIAL_HORIZON,
};
pub use step::{
    check_interactable, in_reach, navigate, step, Action, FailureReason, StepResult, World,
    REACH_DISTANCE,
};
