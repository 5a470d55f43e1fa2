//! Sparse features for the fine-grained policy.
//!
//! Everything is expressed relative to the agent: the target offset is
//! rotated into (forward, right) cells, so one policy serves every heading.
//! Most of the vector is one-hot windows over that offset jointly with the
//! camera pitch, which is what decides whether the target can be seen.

use serde::{Deserialize, Serialize};

use crate::mapping::PoseEstimate;
use crate::world::{ClassId, EgoFrame, Yaw, CELL_SIZE, HORIZON_MIN, HORIZON_STEP, REACH_DISTANCE};

const N_HORIZON: usize = 7;
const DENSE: usize = 7;
// (forward, right) window
const F2: (i32, i32) = (-10, 10);
const R2: (i32, i32) = (-10, 10);
// (forward, right, horizon) window
const F3: (i32, i32) = (-6, 10);
const R3: (i32, i32) = (-8, 8);

const fn span(w: (i32, i32)) -> usize {
    (w.1 - w.0 + 1) as usize
}

const OFF_DENSE: usize = 0;
const OFF_FR: usize = OFF_DENSE + DENSE;
const N_HEIGHT: usize = 5;
const OFF_FRH: usize = OFF_FR + span(F2) * span(R2) + 1;
const OFF_H: usize = OFF_FRH + span(F3) * span(R3) * N_HORIZON * N_HEIGHT + 1;
const OFF_HVIS: usize = OFF_H + N_HORIZON;
const OFF_RVB: usize = OFF_HVIS + 2 * N_HORIZON;
const OFF_SIDE: usize = OFF_RVB + 8;
const OFF_OCC: usize = OFF_SIDE + 4 * N_HORIZON;
const N_QUADRANT: usize = 6 * 5;
const OFF_TOCC: usize = OFF_OCC + 16;
const N_DIST: usize = 7;
const OFF_ELEV: usize = OFF_TOCC + 16 * N_QUADRANT;

const OFF_PATCH: usize = OFF_ELEV + N_HEIGHT * N_HORIZON * N_DIST;
/// Local occupancy patch in agent coordinates, forward x right.
pub const PATCH_F: (i32, i32) = (-1, 3);
pub const PATCH_R: (i32, i32) = (-2, 2);
const N_PATCH: usize = span(PATCH_F) * span(PATCH_R);

/// Length of every feature vector.
pub const N_FEATURES: usize = OFF_PATCH + N_PATCH * N_QUADRANT;

/// Sparse feature vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; N_FEATURES];
        for &(i, x) in &self.entries {
            v[i as usize] = x;
        }
        v
    }

    /// `i:x` pairs joined by `;`, the dataset CSV encoding.
    pub fn encode(&self) -> String {
        let parts: Vec<String> = self
            .entries
            .iter()
            .map(|(i, x)| format!("{i}:{x}"))
            .collect();
        parts.join(";")
    }

    pub fn decode(s: &str) -> Option<Self> {
        let mut entries = Vec::new();
        for part in s.split(';').filter(|p| !p.is_empty()) {
            let (i, x) = part.split_once(':')?;
            let i: u32 = i.parse().ok()?;
            if i as usize >= N_FEATURES || entries.last().is_some_and(|&(j, _)| j >= i) {
                return None;
            }
            entries.push((i, x.parse().ok()?));
        }
        Some(FeatureVector { entries })
    }
}

/// The object the fine policy is steering toward, located in the same
/// cell frame as the pose estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FineTarget {
    pub cell: (i32, i32),
    pub class: ClassId,
    /// Top, in meters, of whatever the target is seen as part of: the
    /// furniture it rests on, or the object itself.
    pub top: f64,
}

fn height_bucket(top: f64) -> usize {
    [0.3, 0.6, 1.0, 1.4]
        .iter()
        .take_while(|&&t| top >= t)
        .count()
}

/// Which 4-neighbors are believed non-navigable, listed ahead, right,
/// back, left relative to the agent's heading.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Surroundings {
    pub agent: [bool; 4],
    pub target: [bool; 4],
    /// Blocked cells of the local patch, row-major over forward then right.
    pub patch: [bool; N_PATCH],
}

impl Surroundings {
    /// Fill all fields from a blocked-cell oracle taking offsets in
    /// (forward, right) agent coordinates.
    pub fn from_fn(target_fr: (i32, i32), blocked: impl Fn(i32, i32) -> bool) -> Self {
        let dirs = [(1, 0), (0, 1), (-1, 0), (0, -1)];
        let agent = dirs.map(|(f, r)| blocked(f, r));
        let target = dirs.map(|(f, r)| blocked(target_fr.0 + f, target_fr.1 + r));
        let mut patch = [false; N_PATCH];
        for f in PATCH_F.0..=PATCH_F.1 {
            for r in PATCH_R.0..=PATCH_R.1 {
                patch[(f - PATCH_F.0) as usize * span(PATCH_R) + (r - PATCH_R.0) as usize] =
                    blocked(f, r);
            }
        }
        Surroundings {
            agent,
            target,
            patch,
        }
    }
}

fn pattern(bits: &[bool; 4]) -> usize {
    bits.iter()
        .enumerate()
        .fold(0, |acc, (k, &b)| acc | ((b as usize) << k))
}

fn quadrant(f: i32, r: i32) -> usize {
    let fb = match f {
        i32::MIN..=-1 => 0,
        0 => 1,
        1..=2 => 2,
        3..=4 => 3,
        5..=6 => 4,
        _ => 5,
    };
    let rb = match r {
        i32::MIN..=-3 => 0,
        -2..=-1 => 1,
        0 => 2,
        1..=2 => 3,
        _ => 4,
    };
    fb * 5 + rb
}

/// Target offset in agent-relative (forward, right) cells.
pub fn relative_offset(pose: &PoseEstimate, target: (i32, i32)) -> (i32, i32) {
    let (ax, az) = pose.cell_offset();
    let (dx, dz) = (target.0 - ax, target.1 - az);
    let yaw = Yaw::from_degrees(pose.yaw);
    let (fx, fz) = yaw.delta();
    let (rx, rz) = yaw.right().delta();
    (dx * fx + dz * fz, dx * rx + dz * rz)
}

fn in_window(v: i32, w: (i32, i32)) -> bool {
    v >= w.0 && v <= w.1
}

/// Build the policy input from the current frame and pose.
///
pub fn fine_features(
    frame: &EgoFrame,
    pose: &PoseEstimate,
    target: &FineTarget,
    around: &Surroundings,
) -> FeatureVector {
    let blocked_ahead = around.agent[0];
    let (f, r) = relative_offset(pose, target.cell);
    let dist = ((f * f + r * r) as f64).sqrt() * CELL_SIZE;
    let reach = dist <= REACH_DISTANCE + 1e-9;
    let h = ((pose.horizon - HORIZON_MIN) / HORIZON_STEP).clamp(0, N_HORIZON as i32 - 1) as usize;

    let w = frame.rays.len().max(1);
    let mut hits = 0usize;
    let mut col_sum = 0usize;
    let mut min_d = frame.max_range;
    for (col, ray) in frame.rays.iter().enumerate() {
        if ray
            .hit
            .as_ref()
            .is_some_and(|hit| hit.classes().any(|c| c == target.class))
        {
            hits += 1;
            col_sum += col;
            min_d = min_d.min(ray.hit_distance);
        }
    }
    let vis = hits > 0;
    let frac = hits as f64 / w as f64;
    let side = if !vis {
        0
    } else {
        let mean = col_sum as f64 / hits as f64 / w as f64;
        if mean < 0.4 {
            1
        } else if mean > 0.6 {
            3
        } else {
            2
        }
    };

    let mut e: Vec<(u32, f64)> = Vec::with_capacity(16);
    let dense = [
        1.0,
        f as f64 / 8.0,
        r as f64 / 8.0,
        dist / REACH_DISTANCE,
        pose.horizon as f64 / 60.0,
        frac,
        min_d / frame.max_range.max(1e-9),
    ];
    for (k, &x) in dense.iter().enumerate() {
        if x != 0.0 {
            e.push(((OFF_DENSE + k) as u32, x));
        }
    }
    let hb = height_bucket(target.top);
    let fr = if in_window(f, F2) && in_window(r, R2) {
        (f - F2.0) as usize * span(R2) + (r - R2.0) as usize
    } else {
        span(F2) * span(R2)
    };
    e.push(((OFF_FR + fr) as u32, 1.0));
    let frh = if in_window(f, F3) && in_window(r, R3) {
        (((f - F3.0) as usize * span(R3) + (r - R3.0) as usize) * N_HORIZON + h) * N_HEIGHT + hb
    } else {
        span(F3) * span(R3) * N_HORIZON * N_HEIGHT
    };
    e.push(((OFF_FRH + frh) as u32, 1.0));
    e.push(((OFF_H + h) as u32, 1.0));
    e.push(((OFF_HVIS + 2 * h + vis as usize) as u32, 1.0));
    e.push((
        (OFF_RVB + 4 * reach as usize + 2 * vis as usize + blocked_ahead as usize) as u32,
        1.0,
    ));
    e.push(((OFF_SIDE + 4 * h + side) as u32, 1.0));
    e.push(((OFF_OCC + pattern(&around.agent)) as u32, 1.0));
    e.push((
        (OFF_TOCC + pattern(&around.target) * N_QUADRANT + quadrant(f, r)) as u32,
        1.0,
    ));
    let db = ((f * f + r * r) as f64)
        .sqrt()
        .round()
        .min((N_DIST - 1) as f64) as usize;
    e.push(((OFF_ELEV + (hb * N_HORIZON + h) * N_DIST + db) as u32, 1.0));
    let q = quadrant(f, r);
    for (k, &b) in around.patch.iter().enumerate() {
        if b {
            e.push(((OFF_PATCH + k * N_QUADRANT + q) as u32, 1.0));
        }
    }
    FeatureVector { entries: e }
}
