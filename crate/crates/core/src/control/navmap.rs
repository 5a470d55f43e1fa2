use serde::{Deserialize, Serialize};

use crate::scene_repr::SceneMemory;
use crate::world::Yaw;

/// Binary navigability over the map grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavMap {
    pub m: usize,
    pub navigable: Vec<bool>,
}

impl NavMap {
    pub fn new(m: usize, navigable: Vec<bool>) -> Self {
        assert_eq!(navigable.len(), m * m);
        NavMap { m, navigable }
    }

    /// Threshold the navigable-class probabilities at `tau`. Grids in
    /// `blocked` (collisions the agent ran into) are never navigable; the
    /// agent's own grid always is.
    pub fn from_memory(
        memory: &dyn SceneMemory,
        nav_class: usize,
        tau: f64,
        agent: usize,
        blocked: &[bool],
    ) -> Self {
        let m = memory.m();
        let mut navigable = vec![0.5 >= tau; m * m];
        for &i in memory.touched() {
            navigable[i] = memory.prob(i, nav_class) >= tau;
        }
        for (n, &b) in navigable.iter_mut().zip(blocked) {
            if b {
                *n = false;
            }
        }
        navigable[agent] = true;
        NavMap { m, navigable }
    }

    /// Everything is free except where the agent collided.
    pub fn obstacles_only(m: usize, agent: usize, blocked: &[bool]) -> Self {
        let mut navigable: Vec<bool> = blocked.iter().map(|b| !b).collect();
        navigable[agent] = true;
        NavMap { m, navigable }
    }

    pub fn is_navigable(&self, i: usize) -> bool {
        self.navigable[i]
    }

    /// Grid one step from `i` in heading `yaw`, if inside the map.
    pub fn neighbor(&self, i: usize, yaw: Yaw) -> Option<usize> {
        neighbor(self.m, i, yaw)
    }
}

pub fn neighbor(m: usize, i: usize, yaw: Yaw) -> Option<usize> {
    let (dx, dz) = yaw.delta();
    let x = (i % m) as i64 + dx as i64;
    let z = (i / m) as i64 + dz as i64;
    let mi = m as i64;
    (x >= 0 && z >= 0 && x < mi && z < mi).then(|| (z * mi + x) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_repr::CellMap;

    #[test]
    fn agent_grid_is_forced_navigable() {
        let mem = CellMap::new(3, 1).unwrap();
        let mut blocked = vec![false; 9];
        blocked[4] = true;
        blocked[5] = true;
        let nav = NavMap::from_memory(&mem, 0, 0.5, 4, &blocked);
        assert!(nav.is_navigable(4));
        assert!(!nav.is_navigable(5));
        assert!(nav.is_navigable(0));
    }

    #[test]
    fn neighbors_stay_in_bounds() {
        assert_eq!(neighbor(3, 0, Yaw(2)), None);
        assert_eq!(neighbor(3, 0, Yaw(0)), Some(3));
        assert_eq!(neighbor(3, 0, Yaw(1)), Some(1));
        assert_eq!(neighbor(3, 2, Yaw(1)), None);
    }
}
