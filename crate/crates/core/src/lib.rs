//! Online differentiable scene semantics with coarse-to-fine control for
//! household mobile manipulation in a grid world.

pub mod bench;
pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod imitation;
pub mod mapping;
pub mod planner;
pub mod scene_repr;
pub mod world;

pub use error::{Error, Result};
