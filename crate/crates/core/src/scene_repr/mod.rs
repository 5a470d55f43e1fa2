//! Scene representations queried by the controller.
//!
//! [`DiffMap`] keeps one embedding per grid and one query vector per
//! semantic class and fits them online to each step's soft labels.
//! [`CellMap`] is the binary baseline that overwrites what it last saw.

mod cell;
mod diff;
pub mod export;

pub use cell::CellMap;
pub use diff::{sigmoid, DiffMap, LossKind, ReprConfig};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mapping::SoftLabels;

/// Per-grid probabilities of one semantic class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbMap {
    pub m: usize,
    pub p: Vec<f64>,
}

impl ProbMap {
    pub fn uniform(m: usize, value: f64) -> Self {
        ProbMap {
            m,
            p: vec![value; m * m],
        }
    }
}

/// Common interface of the differentiable map and the cell baseline.
pub trait SceneMemory: Send {
    fn m(&self) -> usize;

    fn n_classes(&self) -> usize;

    /// Fold one step's labels into the representation.
    fn update(&mut self, labels: &SoftLabels);

    /// Probability that grid `i` holds class `j`.
    fn prob(&self, i: usize, j: usize) -> f64;

    fn query(&self, j: usize) -> Result<ProbMap>;

    /// Grids that have received any evidence, in first-touch order. All
    /// other grids report the 0.5 prior for every class.
    fn touched(&self) -> &[usize];
}
