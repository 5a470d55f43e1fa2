use std::collections::VecDeque;

use super::navmap::NavMap;
use crate::error::{Error, Result};
use crate::mapping::PoseEstimate;
use crate::world::{Action, Yaw};

const MOVES: [Action; 3] = [Action::MoveAhead, Action::RotateRight, Action::RotateLeft];

fn apply(nav: &NavMap, grid: usize, yaw: Yaw, a: Action) -> Option<(usize, Yaw)> {
    match a {
        Action::MoveAhead => nav
            .neighbor(grid, yaw)
            .filter(|&n| nav.is_navigable(n))
            .map(|n| (n, yaw)),
        Action::RotateRight => Some((grid, yaw.right())),
        Action::RotateLeft => Some((grid, yaw.left())),
        _ => None,
    }
}

/// Shortest action sequence over `(grid, yaw)` states reaching any goal
/// grid, every action costing 1. Expansion order is MoveAhead,
/// RotateRight, RotateLeft, so equal-cost plans are chosen deterministically.
pub fn bfs_plan(nav: &NavMap, start: usize, yaw: Yaw, goals: &[usize]) -> Result<Vec<Action>> {
    let n = nav.m * nav.m;
    let mut is_goal = vec![false; n];
    for &g in goals {
        if g < n {
            is_goal[g] = true;
        }
    }
    if is_goal[start] {
        return Ok(Vec::new());
    }
    let key = |g: usize, y: Yaw| g * 4 + y.0 as usize;
    let mut parent: Vec<Option<(usize, Action)>> = vec![None; n * 4];
    let mut seen = vec![false; n * 4];
    let mut queue = VecDeque::new();
    seen[key(start, yaw)] = true;
    queue.push_back((start, yaw));
    while let Some((g, y)) = queue.pop_front() {
        for a in MOVES {
            let Some((ng, ny)) = apply(nav, g, y, a) else {
                continue;
            };
            let k = key(ng, ny);
            if seen[k] {
                continue;
            }
            seen[k] = true;
            parent[k] = Some((key(g, y), a));
            if is_goal[ng] {
                let mut plan = vec![a];
                let mut cur = key(g, y);
                while let Some((p, pa)) = parent[cur] {
                    plan.push(pa);
                    cur = p;
                }
                plan.reverse();
                return Ok(plan);
            }
            queue.push_back((ng, ny));
        }
    }
    Err(Error::Unreachable)
}

/// Zero to two rotations turning toward `target`, quantized to 90 degrees.
///
/// The dominant axis of the offset decides the heading. On diagonals the
/// heading needing fewer turns wins, then the z axis.
pub fn face_target(pose: &PoseEstimate, agent: (i32, i32), target: (i32, i32)) -> Vec<Action> {
    let (dx, dz) = (target.0 - agent.0, target.1 - agent.1);
    if dx == 0 && dz == 0 {
        return Vec::new();
    }
    let yaw = Yaw::from_degrees(pose.yaw);
    let along_x = if dx > 0 { Yaw(1) } else { Yaw(3) };
    let along_z = if dz > 0 { Yaw(0) } else { Yaw(2) };
    let turns = |to: Yaw| (to.0 as i32 - yaw.0 as i32).rem_euclid(4);
    let cost = |to: Yaw| match turns(to) {
        0 => 0,
        2 => 2,
        _ => 1,
    };
    let want = if dx.abs() > dz.abs() {
        along_x
    } else if dz.abs() > dx.abs() {
        along_z
    } else if cost(along_x) < cost(along_z) {
        along_x
    } else {
        along_z
    };
    match turns(want) {
        0 => vec![],
        1 => vec![Action::RotateRight],
        2 => vec![Action::RotateRight, Action::RotateRight],
        _ => vec![Action::RotateLeft],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open(m: usize) -> NavMap {
        NavMap::new(m, vec![true; m * m])
    }

    #[test]
    fn start_in_goals_is_empty_plan() {
        assert!(bfs_plan(&open(5), 12, Yaw(0), &[12]).unwrap().is_empty());
    }

    #[test]
    fn straight_corridor() {
        let plan = bfs_plan(&open(5), 2, Yaw(0), &[17]).unwrap();
        assert_eq!(plan, vec![Action::MoveAhead; 3]);
    }

    #[test]
    fn walled_goal_is_unreachable() {
        let mut nav = open(3);
        for i in [1, 3, 5, 7] {
            nav.navigable[i] = false;
        }
        assert!(matches!(
            bfs_plan(&nav, 4, Yaw(0), &[0]),
            Err(Error::Unreachable)
        ));
    }

    #[test]
    fn face_target_cases() {
        let p = PoseEstimate {
            x: 0.0,
            z: 0.0,
            yaw: 0,
            horizon: 45,
        };
        assert!(face_target(&p, (0, 0), (0, 3)).is_empty());
        assert_eq!(face_target(&p, (0, 0), (-2, 0)), vec![Action::RotateLeft]);
        assert_eq!(
            face_target(&p, (0, 0), (0, -1)),
            vec![Action::RotateRight, Action::RotateRight]
        );
        assert_eq!(face_target(&p, (0, 0), (2, 2)), Vec::<Action>::new());
    }
}
