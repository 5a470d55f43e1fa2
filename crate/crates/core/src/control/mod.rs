//! Coarse-to-fine control on top of the scene memory.
//!
//! Each subgoal runs a small state machine: random exploration until the
//! target class is localized in the map, BFS navigation into a 1 m disc
//! around the best object-affordance grid, a quarter-turn alignment, a few
//! steps of the learned fine policy, and finally a fixed interaction
//! program. Every executed simulator step triggers exactly one map update.

mod agent;
mod bfs;
pub mod features;
mod fsm;
mod interact;
mod navmap;
pub mod policy;
mod targets;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use agent::{Agent, AgentSetup, StepView, TraceEvent};
pub use bfs::{bfs_plan, face_target};
pub use features::{
    fine_features, relative_offset, FeatureVector, FineTarget, Surroundings, N_FEATURES,
};
pub use fsm::{run_subgoal, FailureKind, Phase, SubgoalResult};
pub use interact::interaction_program;
pub use navmap::NavMap;
pub use policy::{fine_policy, ranked_actions, FineAction, PolicyParams};
pub use targets::{
    coarse_target, coarse_target_where, destination_set, random_walk_target, verb_affordance,
    CoarseTarget, TargetSource, DESTINATION_RADIUS,
};

/// Tunables of the controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    /// Navigable-probability threshold.
    pub tau_nav: f64,
    /// Fine-policy steps per attempt.
    pub fine_steps: usize,
    /// Attempts per subgoal before giving up.
    pub retries: usize,
    /// Primitive steps allowed per subgoal.
    pub subgoal_budget: usize,
    /// Waypoints tried before a random-walk step falls back to turning.
    pub waypoint_tries: usize,
    /// Close openable receptacles again after a plain `Put`.
    pub close_after_put: bool,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            tau_nav: 0.5,
            fine_steps: 8,
            retries: 3,
            subgoal_budget: 400,
            waypoint_tries: 16,
            close_after_put: false,
        }
    }
}

/// Which parts of the method are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AblationMode {
    pub differentiable: bool,
    pub navigation_affordance: bool,
    pub interactive_affordance: bool,
    pub coarse: bool,
    pub fine: bool,
}

impl Default for AblationMode {
    fn default() -> Self {
        AblationMode::FULL
    }
}

impl AblationMode {
    pub const FULL: AblationMode = AblationMode {
        differentiable: true,
        navigation_affordance: true,
        interactive_affordance: true,
        coarse: true,
        fine: true,
    };

    pub const NAMES: [&'static str; 6] = [
        "full",
        "no-differentiable",
        "no-nav-affordance",
        "no-interactive-affordance",
        "no-coarse",
        "no-fine",
    ];

    pub fn from_name(name: &str) -> Result<Self> {
        let mut m = AblationMode::FULL;
        match name {
            "full" => {}
            "no-differentiable" => m.differentiable = false,
            "no-nav-affordance" => m.navigation_affordance = false,
            "no-interactive-affordance" => m.interactive_affordance = false,
            "no-coarse" => m.coarse = false,
            "no-fine" => m.fine = false,
            other => {
                return Err(Error::Config(format!(
                    "unknown ablation {other:?}; expected one of {}",
                    Self::NAMES.join(", ")
                )))
            }
        }
        Ok(m)
    }

    /// Name of the mode if it is one of the named single ablations.
    pub fn name(&self) -> &'static str {
        Self::NAMES
            .iter()
            .copied()
            .find(|n| Self::from_name(n).ok() == Some(*self))
            .unwrap_or("custom")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ablation_names_round_trip() {
        for n in AblationMode::NAMES {
            assert_eq!(AblationMode::from_name(n).unwrap().name(), n);
        }
        assert!(AblationMode::from_name("no-map").is_err());
    }
}
