//! Success and goal-condition rates, plain and path-length weighted.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::episode::EpisodeResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub episodes: usize,
    pub sr: f64,
    pub gc: f64,
    pub plwsr: f64,
    pub plwgc: f64,
}

/// Aggregate episode results. Sums run in result order so the numbers only
/// depend on the results themselves.
pub fn metrics(results: &[EpisodeResult]) -> Result<Metrics> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    let n = results.len() as f64;
    let (mut sr, mut gc, mut plwsr, mut plwgc) = (0.0, 0.0, 0.0, 0.0);
    for r in results {
        let s = if r.success { 1.0 } else { 0.0 };
        let g = r.goal_fraction();
        let w = r.path_weight();
        sr += s;
        gc += g;
        plwsr += s * w;
        plwgc += g * w;
    }
    Ok(Metrics {
        episodes: results.len(),
        sr: sr / n,
        gc: gc / n,
        plwsr: plwsr / n,
        plwgc: plwgc / n,
    })
}

/// Episode count per failure tag, successes excluded.
pub fn failure_counts(results: &[EpisodeResult]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for r in results.iter().filter(|r| !r.success) {
        let tag = r.failure.map_or("unknown", |f| f.name());
        *out.entry(tag.to_string()).or_insert(0) += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::FailureTag;
    use crate::planner::TaskType;

    fn result(
        success: bool,
        met: usize,
        total: usize,
        agent: usize,
        expert: usize,
    ) -> EpisodeResult {
        EpisodeResult {
            seed: 0,
            scene_seed: 0,
            task: String::new(),
            task_type: TaskType::PickPlace,
            driver: "full".into(),
            success,
            conditions_met: met,
            conditions_total: total,
            agent_steps: agent,
            expert_steps: expert,
            subgoals: Vec::new(),
            failure: (!success).then_some(FailureTag::Interaction),
            error: None,
        }
    }

    #[test]
    fn equal_lengths_give_full_weight() {
        let m = metrics(&[result(true, 2, 2, 30, 30)]).unwrap();
        assert_eq!((m.sr, m.plwsr), (1.0, 1.0));
    }

    #[test]
    fn double_length_halves_weighted_success() {
        let m = metrics(&[result(true, 2, 2, 60, 30)]).unwrap();
        assert_eq!(m.sr, 1.0);
        assert_eq!(m.plwsr, 0.5);
    }

    #[test]
    fn shorter_than_expert_is_capped() {
        let m = metrics(&[result(true, 1, 1, 10, 30)]).unwrap();
        assert_eq!(m.plwsr, 1.0);
    }

    #[test]
    fn partial_conditions_count_toward_gc_only() {
        let m = metrics(&[result(false, 2, 4, 50, 30)]).unwrap();
        assert_eq!((m.sr, m.gc), (0.0, 0.5));
        assert_eq!(
            failure_counts(&[result(false, 2, 4, 50, 30)])["interaction"],
            1
        );
    }

    #[test]
    fn empty_results_are_an_error() {
        assert!(matches!(metrics(&[]), Err(Error::EmptyResults)));
    }
}
