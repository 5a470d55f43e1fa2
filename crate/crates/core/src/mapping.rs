//! From egocentric frames to allocentric grid observations.
//!
//! The agent's start pose anchors the map: it sits at the center grid
//! `(M/2, M/2)` and the pose is tracked by summing executed actions. Each
//! ray hit or free-floor sample becomes one physical point that may carry
//! several semantic labels, points are binned per grid, and per-grid class
//! proportions are normalized into soft labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::render::{bearing_direction, ray_bearing};
use crate::world::{Action, Affordance, AgentState, Catalog, EgoFrame, StepResult, Yaw, CELL_SIZE};

/// Agent pose relative to the episode anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    /// Meters along +x from the anchor.
    pub x: f64,
    /// Meters along +z from the anchor.
    pub z: f64,
    /// Degrees in `{0, 90, 180, 270}`.
    pub yaw: i32,
    pub horizon: i32,
}

impl PoseEstimate {
    /// Pose at the anchor with the agent's current heading and pitch.
    pub fn anchored(agent: &AgentState) -> Self {
        PoseEstimate {
            x: 0.0,
            z: 0.0,
            yaw: agent.yaw.degrees(),
            horizon: agent.horizon,
        }
    }

    /// Offset from the anchor in whole cells.
    pub fn cell_offset(&self) -> (i32, i32) {
        (
            (self.x / CELL_SIZE).round() as i32,
            (self.z / CELL_SIZE).round() as i32,
        )
    }

    fn shift(&mut self, yaw: Yaw) {
        let (dx, dz) = yaw.delta();
        self.x += dx as f64 * CELL_SIZE;
        self.z += dz as f64 * CELL_SIZE;
    }
}

/// Apply the nominal effect of an action if it succeeded.
///
/// Steps of 0.25 m are exact in binary floating point, so the estimate
/// never drifts from the simulator.
pub fn update_pose(pose: &PoseEstimate, action: &Action, result: &StepResult) -> PoseEstimate {
    let mut p = *pose;
    if !result.success {
        return p;
    }
    let yaw = Yaw::from_degrees(p.yaw);
    match action {
        Action::MoveAhead => p.shift(yaw),
        Action::MoveLeft => p.shift(yaw.left()),
        Action::MoveRight => p.shift(yaw.right()),
        Action::MoveBack => p.shift(yaw.back()),
        Action::RotateRight => p.yaw = yaw.right().degrees(),
        Action::RotateLeft => p.yaw = yaw.left().degrees(),
        Action::LookUp => p.horizon -= crate::world::HORIZON_STEP,
        Action::LookDown => p.horizon += crate::world::HORIZON_STEP,
        _ => {}
    }
    p
}

/// Set of semantic labels carried by one physical point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassSet(pub u128);

impl ClassSet {
    pub const MAX_CLASSES: usize = 128;

    pub fn insert(&mut self, j: usize) {
        self.0 |= 1u128 << j;
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0 & (1u128 << j) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(&self) -> ClassSetIter {
        ClassSetIter(self.0)
    }
}

/// Set bits of a [`ClassSet`] in increasing order.
pub struct ClassSetIter(u128);

impl Iterator for ClassSetIter {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let j = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticPoint {
    pub x: f64,
    pub z: f64,
    /// Object classes first, then affordance classes offset by the number
    /// of object classes. Empty for structure such as walls.
    pub classes: ClassSet,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SemanticPoints {
    pub points: Vec<SemanticPoint>,
}

impl SemanticPoints {
    /// One `(x, z, class)` entry per label, the flat view of the cloud.
    pub fn labelled(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.points
            .iter()
            .flat_map(|p| p.classes.iter().map(move |j| (p.x, p.z, j)))
    }
}

/// Project a frame into world points relative to the anchor.
pub fn project_frame(frame: &EgoFrame, pose: &PoseEstimate, catalog: &Catalog) -> SemanticPoints {
    let n_obj = catalog.len();
    let nav = catalog.affordance_index(Affordance::Navigable);
    let w = frame.rays.len();
    let dirs: Vec<(f64, f64)> = (0..w)
        .map(|col| bearing_direction(ray_bearing(pose.yaw as f64, col, w, frame.fov_deg)))
        .collect();
    let mut points = Vec::with_capacity(w + frame.free_samples.len());
    for (col, ray) in frame.rays.iter().enumerate() {
        let Some(hit) = &ray.hit else { continue };
        let (dx, dz) = dirs[col];
        let mut classes = ClassSet::default();
        for c in hit.classes() {
            classes.insert(c);
        }
        for b in hit.affordance_union().bits() {
            classes.insert(n_obj + Affordance::from_bit(b) as usize);
        }
        points.push(SemanticPoint {
            x: pose.x + ray.hit_distance * dx,
            z: pose.z + ray.hit_distance * dz,
            classes,
        });
    }
    let mut nav_set = ClassSet::default();
    nav_set.insert(nav);
    for s in &frame.free_samples {
        let (dx, dz) = dirs[s.ray as usize];
        points.push(SemanticPoint {
            x: pose.x + s.distance * dx,
            z: pose.z + s.distance * dz,
            classes: nav_set,
        });
    }
    SemanticPoints { points }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    /// Grids per side.
    pub m: usize,
    /// A grid is visible when it receives more than this many points.
    pub rho: u32,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig { m: 80, rho: 8 }
    }
}

impl MapConfig {
    /// Grid containing a point given in meters from the anchor.
    pub fn grid_of(&self, x: f64, z: f64) -> Option<usize> {
        let half = (self.m / 2) as i64;
        let gx = (x / CELL_SIZE + 0.5).floor() as i64 + half;
        let gz = (z / CELL_SIZE + 0.5).floor() as i64 + half;
        let m = self.m as i64;
        (gx >= 0 && gz >= 0 && gx < m && gz < m).then(|| (gz * m + gx) as usize)
    }

    /// Grid index of a cell offset from the anchor.
    pub fn grid_of_offset(&self, dx: i32, dz: i32) -> Option<usize> {
        let half = (self.m / 2) as i64;
        let (gx, gz) = (dx as i64 + half, dz as i64 + half);
        let m = self.m as i64;
        (gx >= 0 && gz >= 0 && gx < m && gz < m).then(|| (gz * m + gx) as usize)
    }

    pub fn grid_xz(&self, i: usize) -> (i32, i32) {
        ((i % self.m) as i32, (i / self.m) as i32)
    }

    /// Cell offset from the anchor of a grid index.
    pub fn offset_of(&self, i: usize) -> (i32, i32) {
        let (gx, gz) = self.grid_xz(i);
        let half = (self.m / 2) as i32;
        (gx - half, gz - half)
    }

    pub fn n_grids(&self) -> usize {
        self.m * self.m
    }
}

/// Point counts of the grids touched by one frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCount {
    pub c: u32,
    /// Dense per-class counts, each at most `c`.
    pub per_class: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridObservation {
    pub m: usize,
    pub n_classes: usize,
    /// Only grids with at least one point, keyed by grid index.
    pub grids: BTreeMap<usize, GridCount>,
    /// Points that fell outside the map extent.
    pub dropped: usize,
}

impl GridObservation {
    pub fn c(&self, i: usize) -> u32 {
        self.grids.get(&i).map_or(0, |g| g.c)
    }

    pub fn c_class(&self, i: usize, j: usize) -> u32 {
        self.grids.get(&i).map_or(0, |g| g.per_class[j])
    }

    pub fn total_points(&self) -> u64 {
        self.grids.values().map(|g| g.c as u64).sum()
    }
}

pub fn bin_points(
    points: &SemanticPoints,
    cfg: &MapConfig,
    n_classes: usize,
) -> Result<GridObservation> {
    if n_classes > ClassSet::MAX_CLASSES {
        return Err(Error::Config(format!(
            "at most {} semantic classes supported",
            ClassSet::MAX_CLASSES
        )));
    }
    let mut grids: BTreeMap<usize, GridCount> = BTreeMap::new();
    let mut dropped = 0;
    for p in &points.points {
        let Some(i) = cfg.grid_of(p.x, p.z) else {
            dropped += 1;
            continue;
        };
        let g = grids.entry(i).or_insert_with(|| GridCount {
            c: 0,
            per_class: vec![0; n_classes],
        });
        g.c += 1;
        for j in p.classes.iter() {
            if j < n_classes {
                g.per_class[j] += 1;
            }
        }
    }
    Ok(GridObservation {
        m: cfg.m,
        n_classes,
        grids,
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledGrid {
    pub index: usize,
    pub c: u32,
    pub visible: bool,
    /// One soft label per semantic class.
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftLabels {
    pub rho: u32,
    pub n_classes: usize,
    /// Observed grids in index order.
    pub grids: Vec<LabeledGrid>,
}

impl SoftLabels {
    pub fn empty(n_classes: usize, rho: u32) -> Self {
        SoftLabels {
            rho,
            n_classes,
            grids: Vec::new(),
        }
    }

    pub fn visible(&self) -> impl Iterator<Item = &LabeledGrid> + '_ {
        self.grids.iter().filter(|g| g.visible)
    }

    pub fn is_visible(&self, i: usize) -> bool {
        self.grids
            .binary_search_by_key(&i, |g| g.index)
            .is_ok_and(|k| self.grids[k].visible)
    }

    pub fn label(&self, i: usize, j: usize) -> Option<f64> {
        self.grids
            .binary_search_by_key(&i, |g| g.index)
            .ok()
            .map(|k| self.grids[k].y[j])
    }
}

/// Normalize per-grid class proportions by their frame-wide maximum.
///
/// The maximum runs over grids that received points. A class absent from
/// the frame gets label 0 on every observed grid.
pub fn soft_labels(obs: &GridObservation, rho: u32) -> SoftLabels {
    let n = obs.n_classes;
    let mut max_p = vec![0.0f64; n];
    for g in obs.grids.values() {
        for (m, &k) in max_p.iter_mut().zip(&g.per_class) {
            *m = m.max(k as f64 / g.c as f64);
        }
    }
    let grids = obs
        .grids
        .iter()
        .map(|(&index, g)| {
            let y = (0..n)
                .map(|j| {
                    if max_p[j] > 0.0 {
                        (g.per_class[j] as f64 / g.c as f64) / max_p[j]
                    } else {
                        0.0
                    }
                })
                .collect();
            LabeledGrid {
                index,
                c: g.c,
                visible: g.c > rho,
                y,
            }
        })
        .collect();
    SoftLabels {
        rho,
        n_classes: n,
        grids,
    }
}

/// One line of the optional per-step observation dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub step: usize,
    pub pose: PoseEstimate,
    /// `(grid index, point count)` of every grid with points.
    pub counts: Vec<(usize, u32)>,
}

impl ObservationRecord {
    pub fn new(step: usize, pose: PoseEstimate, obs: &GridObservation) -> Self {
        ObservationRecord {
            step,
            pose,
            counts: obs.grids.iter().map(|(&i, g)| (i, g.c)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::render::{Ray, RayHit};
    use crate::world::AffordanceMask;

    fn frame_with(hit: RayHit, distance: f64, rays: usize) -> EgoFrame {
        let mut rays_v = vec![
            Ray {
                hit_distance: 5.0,
                hit: None
            };
            rays
        ];
        rays_v[rays / 2] = Ray {
            hit_distance: distance,
            hit: Some(hit),
        };
        EgoFrame {
            rays: rays_v,
            free_samples: vec![],
            fov_deg: 60.0,
            max_range: 5.0,
        }
    }

    #[test]
    fn four_right_turns_restore_yaw() {
        let mut p = PoseEstimate {
            x: 0.0,
            z: 0.0,
            yaw: 0,
            horizon: 45,
        };
        for _ in 0..4 {
            p = update_pose(&p, &Action::RotateRight, &StepResult::ok());
        }
        assert_eq!(p.yaw, 0);
        let p = update_pose(&p, &Action::MoveAhead, &StepResult::ok());
        assert_eq!((p.x, p.z), (0.0, 0.25));
        let q = update_pose(
            &p,
            &Action::MoveAhead,
            &StepResult::fail(crate::world::FailureReason::Collision),
        );
        assert_eq!(p, q);
    }

    #[test]
    fn center_hit_projects_straight_ahead() {
        let cat = Catalog::default();
        let hit = RayHit {
            hit_class: Some(14),
            hit_affordance: AffordanceMask::NONE,
            hit_object_id: Some(0),
            contents: vec![],
        };
        let f = frame_with(hit, 0.75, 120);
        let pts = project_frame(
            &f,
            &PoseEstimate {
                x: 0.0,
                z: 0.0,
                yaw: 0,
                horizon: 45,
            },
            &cat,
        );
        assert_eq!(pts.points.len(), 1);
        assert!(pts.points[0].x.abs() < 1e-12 && (pts.points[0].z - 0.75).abs() < 1e-12);
    }

    #[test]
    fn affordance_bits_expand_into_labels() {
        let cat = Catalog::default();
        let hit = RayHit {
            hit_class: Some(14),
            hit_affordance: AffordanceMask::PICKUPABLE | AffordanceMask::OPENABLE,
            hit_object_id: Some(0),
            contents: vec![],
        };
        let pts = project_frame(
            &frame_with(hit, 1.0, 120),
            &PoseEstimate {
                x: 0.0,
                z: 0.0,
                yaw: 0,
                horizon: 0,
            },
            &cat,
        );
        let labels: Vec<_> = pts.labelled().map(|(_, _, j)| j).collect();
        assert_eq!(
            labels,
            vec![
                14,
                cat.affordance_index(Affordance::Pickupable),
                cat.affordance_index(Affordance::Openable)
            ]
        );
        let first = pts.labelled().next().unwrap();
        assert!(pts.labelled().all(|(x, z, _)| x == first.0 && z == first.1));
    }

    #[test]
    fn empty_points_bin_to_nothing() {
        let obs = bin_points(&SemanticPoints::default(), &MapConfig::default(), 28).unwrap();
        assert!(obs.grids.is_empty());
        assert!(soft_labels(&obs, 8).grids.is_empty());
    }

    #[test]
    fn ten_points_in_one_cell() {
        let mut set = ClassSet::default();
        set.insert(3);
        let pts = SemanticPoints {
            points: vec![
                SemanticPoint {
                    x: 0.5,
                    z: 0.5,
                    classes: set
                };
                10
            ],
        };
        let cfg = MapConfig::default();
        let obs = bin_points(&pts, &cfg, 28).unwrap();
        let i = cfg.grid_of(0.5, 0.5).unwrap();
        assert_eq!((obs.c(i), obs.c_class(i, 3)), (10, 10));
        assert_eq!(obs.grids.len(), 1);
    }

    #[test]
    fn eq1_hand_example() {
        let mut grids = BTreeMap::new();
        let mut a = vec![0; 2];
        a[1] = 500;
        let mut b = vec![0; 2];
        b[1] = 500;
        grids.insert(
            0,
            GridCount {
                c: 1000,
                per_class: a,
            },
        );
        grids.insert(
            1,
            GridCount {
                c: 2000,
                per_class: b,
            },
        );
        let obs = GridObservation {
            m: 80,
            n_classes: 2,
            grids,
            dropped: 0,
        };
        let l = soft_labels(&obs, 8);
        assert_eq!(l.label(0, 1), Some(1.0));
        assert_eq!(l.label(1, 1), Some(0.5));
        assert_eq!(l.label(0, 0), Some(0.0));
    }

    #[test]
    fn visibility_threshold_is_strict() {
        let mut grids = BTreeMap::new();
        grids.insert(
            0,
            GridCount {
                c: 500,
                per_class: vec![500],
            },
        );
        grids.insert(
            1,
            GridCount {
                c: 501,
                per_class: vec![501],
            },
        );
        let obs = GridObservation {
            m: 80,
            n_classes: 1,
            grids,
            dropped: 0,
        };
        let l = soft_labels(&obs, 500);
        assert!(!l.is_visible(0));
        assert!(l.is_visible(1));
    }

    #[test]
    fn points_outside_extent_are_dropped() {
        let cfg = MapConfig { m: 4, rho: 1 };
        let mut set = ClassSet::default();
        set.insert(0);
        let pts = SemanticPoints {
            points: vec![
                SemanticPoint {
                    x: 0.0,
                    z: 0.0,
                    classes: set,
                },
                SemanticPoint {
                    x: 9.0,
                    z: 0.0,
                    classes: set,
                },
            ],
        };
        let obs = bin_points(&pts, &cfg, 1).unwrap();
        assert_eq!((obs.total_points(), obs.dropped), (1, 1));
    }
}
