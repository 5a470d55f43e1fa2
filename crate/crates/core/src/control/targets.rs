use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::Verb;
use crate::scene_repr::SceneMemory;
use crate::world::Affordance;

/// Euclidean radius of the destination set, in cells (1 m).
pub const DESTINATION_RADIUS: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetSource {
    ObjectQuery,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseTarget {
    pub target_grid: usize,
    /// Grids the agent may stop at, in index order.
    pub destination_set: Vec<usize>,
    pub source: TargetSource,
}

/// The target grid and every grid within `radius` cells of it.
pub fn destination_set(m: usize, target: usize, radius: i32) -> Vec<usize> {
    let (tx, tz) = ((target % m) as i32, (target / m) as i32);
    let mut out = Vec::new();
    for z in (tz - radius).max(0)..=(tz + radius).min(m as i32 - 1) {
        for x in (tx - radius).max(0)..=(tx + radius).min(m as i32 - 1) {
            let (dx, dz) = (x - tx, z - tz);
            if dx * dx + dz * dz <= radius * radius {
                out.push(z as usize * m + x as usize);
            }
        }
    }
    out
}

/// Affordance that qualifies the target of a verb. `None` means the object
/// map alone decides.
pub fn verb_affordance(verb: Verb) -> Option<Affordance> {
    match verb {
        Verb::GotoLocation => None,
        Verb::PickUp => Some(Affordance::Pickupable),
        Verb::Put | Verb::Heat | Verb::Cool | Verb::Clean => Some(Affordance::Receptacle),
        Verb::Toggle => Some(Affordance::ToggleableOn),
        Verb::Slice => Some(Affordance::Sliceable),
    }
}

/// Uniformly pick one of `candidates` as a waypoint.
pub fn random_walk_target<R: Rng + ?Sized>(
    candidates: &[usize],
    rng: &mut R,
) -> Result<CoarseTarget> {
    if candidates.is_empty() {
        return Err(Error::NoNavigableCell);
    }
    let g = candidates[rng.gen_range(0..candidates.len())];
    Ok(CoarseTarget {
        target_grid: g,
        destination_set: vec![g],
        source: TargetSource::Random,
    })
}

fn dist2(m: usize, a: usize, b: usize) -> i64 {
    let dx = (a % m) as i64 - (b % m) as i64;
    let dz = (a / m) as i64 - (b / m) as i64;
    dx * dx + dz * dz
}

/// Argmax of `p_obj * p_aff` over the grids accepted by `allow`, ties going
/// to the grid nearer the agent and then to the smaller index.
pub fn coarse_target_where(
    memory: &dyn SceneMemory,
    object_class: usize,
    affordance_class: Option<usize>,
    agent_grid: usize,
    radius: i32,
    allow: impl Fn(usize) -> bool,
) -> Option<CoarseTarget> {
    let m = memory.m();
    let p_obj = memory.query(object_class).ok()?;
    let p_aff = match affordance_class {
        Some(a) => Some(memory.query(a).ok()?),
        None => None,
    };
    let mut best: Option<(f64, i64, usize)> = None;
    for i in 0..m * m {
        if !allow(i) {
            continue;
        }
        let u = p_obj.p[i] * p_aff.as_ref().map_or(1.0, |p| p.p[i]);
        let d = dist2(m, i, agent_grid);
        let better = match best {
            None => true,
            Some((bu, bd, bi)) => u > bu || (u == bu && (d < bd || (d == bd && i < bi))),
        };
        if better {
            best = Some((u, d, i));
        }
    }
    best.map(|(_, _, g)| CoarseTarget {
        target_grid: g,
        destination_set: destination_set(m, g, radius),
        source: TargetSource::ObjectQuery,
    })
}

/// Grid with the largest object-affordance union probability.
pub fn coarse_target(
    memory: &dyn SceneMemory,
    object_class: usize,
    affordance_class: Option<usize>,
    agent_grid: usize,
) -> Result<CoarseTarget> {
    if object_class >= memory.n_classes() {
        return Err(Error::ClassOutOfRange(object_class));
    }
    coarse_target_where(
        memory,
        object_class,
        affordance_class,
        agent_grid,
        DESTINATION_RADIUS,
        |_| true,
    )
    .ok_or(Error::ClassOutOfRange(
        affordance_class.unwrap_or(object_class),
    ))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::scene_repr::{DiffMap, ReprConfig};

    #[test]
    fn destination_set_is_a_one_meter_disc() {
        let d = destination_set(20, 10 * 20 + 10, 4);
        assert_eq!(d.len(), 49);
        assert!(d.contains(&(10 * 20 + 14)));
        assert!(!d.contains(&(14 * 20 + 14)));
    }

    #[test]
    fn fresh_map_targets_the_agent_grid() {
        let map = DiffMap::new(
            9,
            3,
            ReprConfig {
                c: 4,
                ..Default::default()
            },
            0,
        );
        let t = coarse_target(&map, 0, Some(1), 40).unwrap();
        assert_eq!(t.target_grid, 40);
    }

    #[test]
    fn single_candidate_is_forced() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(random_walk_target(&[7], &mut rng).unwrap().target_grid, 7);
        assert!(random_walk_target(&[], &mut rng).is_err());
    }
}
