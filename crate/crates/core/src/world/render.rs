//! Oracle egocentric renderer.
//!
//! Casts one ray per image column through the cell grid and reports what
//! the first visible occluder is, together with samples of traversed free
//! floor. Vertical visibility follows from the camera pitch: an entity is
//! seen only if part of its height span falls inside the vertical field of
//! view, so low objects next to the agent need the camera tilted down.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::catalog::{AffordanceMask, ClassId, ClassKind};
use super::scene::{AgentState, CellKind, GridScene, ObjectId, CELL_SIZE};

const WALL_HEIGHT: f64 = 2.5;
/// Traversals shorter than this (in cells) graze a corner and are skipped.
const MIN_SEGMENT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    /// Number of rays (image columns).
    pub rays: usize,
    /// Horizontal and vertical field of view in degrees.
    pub fov_deg: f64,
    pub max_range: f64,
    /// Free-floor samples emitted per traversed cell.
    pub samples_per_cell: usize,
    pub camera_height: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            rays: 120,
            fov_deg: 60.0,
            max_range: 5.0,
            samples_per_cell: 4,
            camera_height: 1.5,
        }
    }
}

/// Perception corruption applied on top of an oracle frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// Probability that each reported object class is replaced by a
    /// uniformly drawn different class.
    pub class_flip: f64,
    /// Standard deviation of additive hit-depth noise, meters.
    pub depth_jitter: f64,
}

impl NoiseModel {
    pub fn is_clean(&self) -> bool {
        self.class_flip <= 0.0 && self.depth_jitter <= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentHit {
    pub class: ClassId,
    pub affordance: AffordanceMask,
    pub object_id: ObjectId,
}

/// The visible entity a ray stopped at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayHit {
    /// `None` for structure (walls).
    pub hit_class: Option<ClassId>,
    pub hit_affordance: AffordanceMask,
    pub hit_object_id: Option<ObjectId>,
    /// Objects resting in or on the hit receptacle that are visible with it.
    pub contents: Vec<ContentHit>,
}

impl RayHit {
    /// Object ids seen along this ray, container first.
    pub fn object_ids(&self) -> impl Iterator<Item = ObjectId> + '_ {
        self.hit_object_id
            .into_iter()
            .chain(self.contents.iter().map(|c| c.object_id))
    }

    pub fn classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.hit_class
            .into_iter()
            .chain(self.contents.iter().map(|c| c.class))
    }

    pub fn affordance_union(&self) -> AffordanceMask {
        self.contents
            .iter()
            .fold(self.hit_affordance, |m, c| m | c.affordance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    /// Distance in meters at which the ray stopped; `max_range` if nothing
    /// occluded it.
    pub hit_distance: f64,
    /// `None` if the ray ran out of range or the occluder is outside the
    /// vertical field of view.
    pub hit: Option<RayHit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeSample {
    pub ray: u32,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoFrame {
    pub rays: Vec<Ray>,
    pub free_samples: Vec<FreeSample>,
    pub fov_deg: f64,
    pub max_range: f64,
}

impl EgoFrame {
    /// Whether any ray sees the object.
    pub fn sees_object(&self, id: ObjectId) -> bool {
        self.rays
            .iter()
            .filter_map(|r| r.hit.as_ref())
            .any(|h| h.object_ids().any(|o| o == id))
    }

    /// Whether any ray reports the class (possibly misclassified).
    pub fn sees_class(&self, class: ClassId) -> bool {
        self.rays
            .iter()
            .filter_map(|r| r.hit.as_ref())
            .any(|h| h.classes().any(|c| c == class))
    }

    pub fn visible_objects(&self) -> Vec<ObjectId> {
        let mut ids: Vec<ObjectId> = self
            .rays
            .iter()
            .filter_map(|r| r.hit.as_ref())
            .flat_map(|h| h.object_ids())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Corrupt the frame in place.
    pub fn apply_noise<R: Rng + ?Sized>(
        &mut self,
        noise: &NoiseModel,
        n_classes: usize,
        rng: &mut R,
    ) {
        if noise.is_clean() {
            return;
        }
        let jitter =
            (noise.depth_jitter > 0.0).then(|| Normal::new(0.0, noise.depth_jitter).unwrap());
        let flip = |c: ClassId, rng: &mut R| -> ClassId {
            if n_classes > 1 && noise.class_flip > 0.0 && rng.gen::<f64>() < noise.class_flip {
                let k = rng.gen_range(0..n_classes - 1);
                if k >= c {
                    k + 1
                } else {
                    k
                }
            } else {
                c
            }
        };
        for ray in &mut self.rays {
            if let Some(hit) = ray.hit.as_mut() {
                if let Some(c) = hit.hit_class {
                    hit.hit_class = Some(flip(c, rng));
                }
                for content in &mut hit.contents {
                    content.class = flip(content.class, rng);
                }
                if let Some(j) = &jitter {
                    ray.hit_distance =
                        (ray.hit_distance + j.sample(rng)).clamp(0.0, self.max_range);
                }
            }
        }
    }
}

/// Absolute bearing in degrees of column `col` out of `width`.
pub fn ray_bearing(yaw_deg: f64, col: usize, width: usize, fov_deg: f64) -> f64 {
    yaw_deg + fov_deg * (col as f64 / width as f64 - 0.5)
}

/// Unit direction `(dx, dz)` of a bearing, 0 degrees along +z, 90 along +x.
pub fn bearing_direction(bearing_deg: f64) -> (f64, f64) {
    let r = bearing_deg.to_radians();
    (r.sin(), r.cos())
}

/// Whether an entity spanning `[bottom, top]` meters at horizontal distance
/// `d` falls into the vertical field of view.
pub fn vertically_visible(bottom: f64, top: f64, d: f64, horizon: i32, cfg: &RenderConfig) -> bool {
    let d = d.max(1e-9);
    let upper = (cfg.camera_height - top).atan2(d).to_degrees();
    let lower = (cfg.camera_height - bottom).atan2(d).to_degrees();
    let half = cfg.fov_deg / 2.0;
    let (lo, hi) = (horizon as f64 - half, horizon as f64 + half);
    upper <= hi && lower >= lo
}

/// Vertical extent of whatever occupies a cell.
fn occupant_span(scene: &GridScene, id: ObjectId) -> (f64, f64) {
    let info = scene.catalog.get(scene.class_of(id));
    match info.kind {
        ClassKind::Fixed => info.height,
        ClassKind::Small => (0.0, info.height.1),
    }
}

fn make_hit(scene: &GridScene, id: ObjectId) -> RayHit {
    let obj = &scene.objects[id as usize];
    let mut ids = Vec::new();
    scene.visible_contents(id, &mut ids);
    RayHit {
        hit_class: Some(obj.class_id),
        hit_affordance: obj.current_affordance(),
        hit_object_id: Some(id),
        contents: ids
            .into_iter()
            .map(|c| {
                let o = &scene.objects[c as usize];
                ContentHit {
                    class: o.class_id,
                    affordance: o.current_affordance(),
                    object_id: c,
                }
            })
            .collect(),
    }
}

/// Walk the grid cells crossed by a ray, yielding `(x, z, t_enter, t_exit)`
/// in cell units, starting with the origin cell.
pub struct CellWalk {
    ix: i32,
    iz: i32,
    step_x: i32,
    step_z: i32,
    t_max_x: f64,
    t_max_z: f64,
    t_delta_x: f64,
    t_delta_z: f64,
    t: f64,
}

impl CellWalk {
    /// `origin` in cell units (cell `(x, z)` spans `[x, x+1) x [z, z+1)`).
    pub fn new(origin: (f64, f64), dir: (f64, f64)) -> Self {
        let (ox, oz) = origin;
        let (dx, dz) = dir;
        let ix = ox.floor() as i32;
        let iz = oz.floor() as i32;
        let axis = |o: f64, d: f64, i: i32| -> (i32, f64, f64) {
            if d > 0.0 {
                (1, ((i + 1) as f64 - o) / d, 1.0 / d)
            } else if d < 0.0 {
                (-1, (i as f64 - o) / d, -1.0 / d)
            } else {
                (0, f64::INFINITY, f64::INFINITY)
            }
        };
        let (step_x, t_max_x, t_delta_x) = axis(ox, dx, ix);
        let (step_z, t_max_z, t_delta_z) = axis(oz, dz, iz);
        CellWalk {
            ix,
            iz,
            step_x,
            step_z,
            t_max_x,
            t_max_z,
            t_delta_x,
            t_delta_z,
            t: 0.0,
        }
    }
}

impl Iterator for CellWalk {
    type Item = (i32, i32, f64, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let enter = self.t;
        let cell = (self.ix, self.iz);
        let exit;
        if self.t_max_x < self.t_max_z {
            exit = self.t_max_x;
            self.ix += self.step_x;
            self.t_max_x += self.t_delta_x;
        } else {
            exit = self.t_max_z;
            self.iz += self.step_z;
            self.t_max_z += self.t_delta_z;
        }
        self.t = exit;
        Some((cell.0, cell.1, enter, exit))
    }
}

/// Cast the ray of image column `col`, appending its free-floor samples.
pub fn cast_ray(
    scene: &GridScene,
    agent: &AgentState,
    cfg: &RenderConfig,
    col: usize,
    free_samples: &mut Vec<FreeSample>,
) -> Ray {
    let max_cells = cfg.max_range / CELL_SIZE;
    let origin = (agent.x as f64 + 0.5, agent.z as f64 + 0.5);
    let n = cfg.samples_per_cell.max(1);
    let dir = bearing_direction(ray_bearing(
        agent.yaw.degrees() as f64,
        col,
        cfg.rays,
        cfg.fov_deg,
    ));
    let mut ray = Ray {
        hit_distance: cfg.max_range,
        hit: None,
    };
    for (x, z, enter, exit) in CellWalk::new(origin, dir) {
        if (x, z) == (agent.x, agent.z) {
            continue;
        }
        if enter > max_cells || !scene.in_bounds(x, z) {
            break;
        }
        let len = exit - enter;
        if len < MIN_SEGMENT {
            continue;
        }
        let mid = 0.5 * (enter + exit);
        let mid_m = mid * CELL_SIZE;
        if scene.cell(x, z) == CellKind::Wall {
            if mid <= max_cells {
                ray.hit_distance = mid_m;
                if vertically_visible(0.0, WALL_HEIGHT, mid_m, agent.horizon, cfg) {
                    ray.hit = Some(RayHit {
                        hit_class: None,
                        hit_affordance: AffordanceMask::NONE,
                        hit_object_id: None,
                        contents: Vec::new(),
                    });
                }
            }
            break;
        }
        if let Some(id) = scene.occupant(x, z) {
            if mid > max_cells {
                break;
            }
            let (bottom, top) = occupant_span(scene, id);
            if vertically_visible(bottom, top, mid_m, agent.horizon, cfg) {
                ray.hit_distance = mid_m;
                ray.hit = Some(make_hit(scene, id));
                break;
            }
            if top >= cfg.camera_height {
                // tall but out of view: still occludes
                ray.hit_distance = mid_m;
                break;
            }
            continue;
        }
        for k in 0..n {
            let t = enter + (k as f64 + 0.5) / n as f64 * len;
            if t > max_cells {
                break;
            }
            let d = t * CELL_SIZE;
            if vertically_visible(0.0, 0.0, d, agent.horizon, cfg) {
                free_samples.push(FreeSample {
                    ray: col as u32,
                    distance: d,
                });
            }
        }
    }
    ray
}

/// Render the oracle frame for the agent's current pose.
pub fn render_egocentric(scene: &GridScene, agent: &AgentState, cfg: &RenderConfig) -> EgoFrame {
    let mut free_samples = Vec::new();
    let rays = (0..cfg.rays)
        .map(|col| cast_ray(scene, agent, cfg, col, &mut free_samples))
        .collect();
    EgoFrame {
        rays,
        free_samples,
        fov_deg: cfg.fov_deg,
        max_range: cfg.max_range,
    }
}

/// Whether the full render would report `id` on some ray.
///
/// Only columns whose ray can cross the object's cell are cast, which
/// gives the same answer as [`render_egocentric`] at a fraction of the cost.
pub fn object_visible(
    scene: &GridScene,
    agent: &AgentState,
    id: ObjectId,
    cfg: &RenderConfig,
) -> bool {
    let Some((x, z)) = scene.root_cell(id) else {
        return false;
    };
    if (x, z) == (agent.x, agent.z) || !scene.is_reachable_content(id) {
        return false;
    }
    let yaw = agent.yaw.degrees() as f64;
    let (ox, oz) = (agent.x as f64 + 0.5, agent.z as f64 + 0.5);
    // bearings of the cell corners relative to the view center, in (-180, 180]
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (cx, cz) in [(x, z), (x + 1, z), (x, z + 1), (x + 1, z + 1)] {
        let b = (cx as f64 - ox).atan2(cz as f64 - oz).to_degrees() - yaw;
        let b = (b + 540.0).rem_euclid(360.0) - 180.0;
        lo = lo.min(b);
        hi = hi.max(b);
    }
    if hi - lo > 180.0 {
        // the cell straddles the direction straight behind the agent
        return false;
    }
    let w = cfg.rays as f64;
    let first = (((lo / cfg.fov_deg + 0.5) * w).floor().max(0.0)) as usize;
    let last = (((hi / cfg.fov_deg + 0.5) * w).ceil().min(w - 1.0)).max(0.0) as usize;
    if hi < -cfg.fov_deg / 2.0 - 1e-9 || lo > cfg.fov_deg / 2.0 + 1e-9 {
        return false;
    }
    let mut scratch = Vec::new();
    (first..=last.min(cfg.rays - 1)).any(|col| {
        scratch.clear();
        let ray = cast_ray(scene, agent, cfg, col, &mut scratch);
        ray.hit
            .as_ref()
            .is_some_and(|h| h.object_ids().any(|o| o == id))
    })
}
