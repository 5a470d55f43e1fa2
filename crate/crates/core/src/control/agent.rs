use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bfs::bfs_plan;
use super::features::Surroundings;
use super::navmap::{neighbor, NavMap};
use super::policy::PolicyParams;
use super::targets::{
    destination_set, random_walk_target, CoarseTarget, TargetSource, DESTINATION_RADIUS,
};
use super::{AblationMode, ControlConfig};
use crate::error::{Error, Result};
use crate::mapping::{bin_points, project_frame, soft_labels, MapConfig, PoseEstimate};
use crate::scene_repr::{CellMap, DiffMap, ReprConfig, SceneMemory};
use crate::world::render::bearing_direction;
use crate::world::render::ray_bearing;
use crate::world::{
    Action, Affordance, AffordanceMask, Catalog, ClassId, EgoFrame, FailureReason, NoiseModel,
    ObjectId, StepResult, World, Yaw,
};

/// Everything needed to build an [`Agent`] besides the world and policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSetup {
    pub map: MapConfig,
    pub repr: ReprConfig,
    pub control: ControlConfig,
    pub mode: AblationMode,
    pub noise: NoiseModel,
    pub seed: u64,
    pub trace: bool,
}

impl Default for AgentSetup {
    fn default() -> Self {
        AgentSetup {
            map: MapConfig::default(),
            repr: ReprConfig::default(),
            control: ControlConfig::default(),
            mode: AblationMode::FULL,
            noise: NoiseModel::default(),
            seed: 0,
            trace: false,
        }
    }
}

/// One line of the JSONL decision trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum TraceEvent {
    Phase {
        step: usize,
        subgoal: String,
        phase: super::Phase,
    },
    Target {
        step: usize,
        grid: usize,
        class: String,
        source: TargetSource,
    },
    Action {
        step: usize,
        action: String,
        success: bool,
        failure: Option<FailureReason>,
    },
    Subgoal {
        step: usize,
        subgoal: String,
        success: bool,
    },
}

/// What an observer sees after each executed step.
pub struct StepView<'a> {
    pub step: usize,
    pub pose: &'a PoseEstimate,
    pub memory: &'a dyn SceneMemory,
    pub map: &'a MapConfig,
    pub target_grid: Option<usize>,
}

type Observer<'p> = Box<dyn FnMut(&StepView) + 'p>;

/// The embodied agent: simulator handle, pose estimate, scene memory and
/// the bookkeeping the controller keeps between steps.
pub struct Agent<'p> {
    pub world: World,
    pub catalog: Arc<Catalog>,
    pub memory: Box<dyn SceneMemory>,
    pub map: MapConfig,
    pub control: ControlConfig,
    pub mode: AblationMode,
    pub noise: NoiseModel,
    pub policy: Option<&'p PolicyParams>,
    pub pose: PoseEstimate,
    /// The last (possibly corrupted) frame.
    pub frame: EgoFrame,
    /// Grids the agent bumped into.
    pub blocked: Vec<bool>,
    /// Primitive steps executed, composed moves counting their expansion.
    pub steps: usize,
    /// Representation updates performed.
    pub updates: usize,
    /// Object the agent believes it holds.
    pub held: Option<ObjectId>,
    /// Objects the agent has put somewhere.
    pub placed_ids: Vec<ObjectId>,
    /// Grids where the agent took or left an instance of a class; stale
    /// evidence there is ignored when looking for that class again.
    pub moved: Vec<(ClassId, usize)>,
    pub actions: Vec<Action>,
    pub trace: Option<Vec<TraceEvent>>,
    pub current_target: Option<usize>,
    /// Classes reported by at least one ray of any frame so far.
    pub seen_classes: Vec<bool>,
    rng_walk: ChaCha8Rng,
    rng_noise: ChaCha8Rng,
    observer: Option<Observer<'p>>,
}

impl<'p> Agent<'p> {
    pub fn new(world: World, setup: &AgentSetup, policy: Option<&'p PolicyParams>) -> Result<Self> {
        let catalog = world.scene.catalog.clone();
        let m = setup.map.m;
        let span = world.scene.width.max(world.scene.height) as usize;
        if m < 2 * span + 2 {
            return Err(Error::Config(format!(
                "map of {m} grids cannot hold a {span}-cell room from any start"
            )));
        }
        let n = catalog.n_semantic();
        let memory: Box<dyn SceneMemory> = if setup.mode.differentiable {
            Box::new(DiffMap::new(m, n, setup.repr, setup.seed))
        } else {
            Box::new(CellMap::new(m, n)?)
        };
        let pose = PoseEstimate::anchored(&world.agent);
        let frame = world.frame();
        let mut rng_walk = ChaCha8Rng::seed_from_u64(setup.seed);
        rng_walk.set_stream(1);
        let mut rng_noise = ChaCha8Rng::seed_from_u64(setup.seed);
        rng_noise.set_stream(2);
        Ok(Agent {
            world,
            catalog: catalog.clone(),
            memory,
            map: setup.map,
            control: setup.control.clone(),
            mode: setup.mode,
            noise: setup.noise,
            policy,
            pose,
            frame,
            blocked: vec![false; m * m],
            steps: 0,
            updates: 0,
            held: None,
            placed_ids: Vec::new(),
            moved: Vec::new(),
            actions: Vec::new(),
            trace: setup.trace.then(Vec::new),
            current_target: None,
            seen_classes: vec![false; catalog.len()],
            rng_walk,
            rng_noise,
            observer: None,
        })
    }

    /// Call `f` after every executed step.
    pub fn set_observer(&mut self, f: impl FnMut(&StepView) + 'p) {
        self.observer = Some(Box::new(f));
    }

    pub fn agent_grid(&self) -> usize {
        self.map
            .grid_of(self.pose.x, self.pose.z)
            .expect("map extent checked at construction")
    }

    pub fn yaw(&self) -> Yaw {
        Yaw::from_degrees(self.pose.yaw)
    }

    pub fn record(&mut self, ev: impl FnOnce() -> TraceEvent) {
        if let Some(t) = self.trace.as_mut() {
            t.push(ev());
        }
    }

    /// Execute one simulator action and fold the new frame into memory.
    pub fn execute(&mut self, action: Action) -> StepResult {
        let before = self.agent_grid();
        let yaw = self.yaw();
        let r = self.world.step(&action);
        self.steps += action.primitive_len();
        if r.failure == Some(FailureReason::Collision) {
            let dir = match action {
                Action::MoveLeft => Some(yaw.left()),
                Action::MoveRight => Some(yaw.right()),
                Action::MoveBack => Some(yaw.back()),
                Action::MoveAhead => Some(yaw),
                _ => None,
            };
            if let Some(g) = dir.and_then(|d| neighbor(self.map.m, before, d)) {
                self.blocked[g] = true;
            }
        }
        self.pose = crate::mapping::update_pose(&self.pose, &action, &r);
        self.actions.push(action);
        self.perceive();
        let step = self.steps;
        self.record(|| TraceEvent::Action {
            step,
            action: action.name().to_string(),
            success: r.success,
            failure: r.failure,
        });
        if let Some(obs) = self.observer.as_mut() {
            obs(&StepView {
                step: self.steps,
                pose: &self.pose,
                memory: self.memory.as_ref(),
                map: &self.map,
                target_grid: self.current_target,
            });
        }
        r
    }

    fn perceive(&mut self) {
        let mut frame = self.world.frame();
        frame.apply_noise(&self.noise, self.catalog.len(), &mut self.rng_noise);
        let points = project_frame(&frame, &self.pose, &self.catalog);
        // the catalog size is checked when the memory is built
        if let Ok(obs) = bin_points(&points, &self.map, self.catalog.n_semantic()) {
            self.memory.update(&soft_labels(&obs, self.map.rho));
        }
        self.updates += 1;
        for hit in frame.rays.iter().filter_map(|r| r.hit.as_ref()) {
            for c in hit.classes() {
                if let Some(s) = self.seen_classes.get_mut(c) {
                    *s = true;
                }
            }
        }
        self.frame = frame;
        self.refresh_moved();
    }

    pub fn nav_class(&self) -> usize {
        self.catalog.affordance_index(Affordance::Navigable)
    }

    pub fn nav_map(&self) -> NavMap {
        let agent = self.agent_grid();
        if self.mode.navigation_affordance {
            NavMap::from_memory(
                self.memory.as_ref(),
                self.nav_class(),
                self.control.tau_nav,
                agent,
                &self.blocked,
            )
        } else {
            NavMap::obstacles_only(self.map.m, agent, &self.blocked)
        }
    }

    /// Believed blocked cells around the agent and around `target_grid`.
    pub fn surroundings(&self, nav: &NavMap, target_grid: usize) -> Surroundings {
        let (ax, az) = self.pose.cell_offset();
        let (tx, tz) = self.map.offset_of(target_grid);
        let fr = super::features::relative_offset(&self.pose, (tx, tz));
        let yaw = self.yaw();
        let (fx, fz) = yaw.delta();
        let (rx, rz) = yaw.right().delta();
        Surroundings::from_fn(fr, |f, r| {
            let (x, z) = (ax + f * fx + r * rx, az + f * fz + r * rz);
            self.map
                .grid_of_offset(x, z)
                .is_none_or(|g| !nav.is_navigable(g))
        })
    }

    /// Top of the span a `class` target at `g` is seen with: the tallest
    /// furniture the map places there, or the class's own height.
    pub fn target_top(&self, g: usize, class: ClassId) -> f64 {
        use crate::world::ClassKind;
        let own = self.catalog.get(class);
        if own.kind == ClassKind::Fixed {
            return own.height.1;
        }
        (0..self.catalog.len())
            .filter(|&c| {
                self.catalog.get(c).kind == ClassKind::Fixed && self.memory.prob(g, c) > 0.5
            })
            .map(|c| self.catalog.get(c).height.1)
            .fold(own.height.1, f64::max)
    }

    /// Waypoint candidates: grids seen free (or, without the navigation
    /// affordance, any observed grid not known to block). Candidates on the
    /// frontier, next to a grid with no evidence yet, are preferred; the
    /// whole set is used once nothing borders unexplored space.
    pub fn walk_candidates(&self) -> Vec<usize> {
        let free = self.free_grids();
        let m = self.map.m;
        let mut known = vec![false; m * m];
        for &g in self.memory.touched() {
            known[g] = true;
        }
        let frontier: Vec<usize> = free
            .iter()
            .copied()
            .filter(|&g| {
                Yaw::ALL
                    .iter()
                    .any(|&d| neighbor(m, g, d).is_some_and(|n| !known[n]))
            })
            .collect();
        if frontier.is_empty() {
            free
        } else {
            frontier
        }
    }

    fn free_grids(&self) -> Vec<usize> {
        let agent = self.agent_grid();
        let nav = self.nav_class();
        let tau = self.control.tau_nav;
        let mut c: Vec<usize> = self
            .memory
            .touched()
            .iter()
            .copied()
            .filter(|&g| g != agent && !self.blocked[g])
            .filter(|&g| !self.mode.navigation_affordance || self.memory.prob(g, nav) > tau)
            .collect();
        c.sort_unstable();
        c
    }

    /// A BFS plan to a random known-free waypoint, or a single turn when
    /// none is reachable.
    pub fn random_walk_plan(&mut self) -> Vec<Action> {
        let candidates = self.walk_candidates();
        let nav = self.nav_map();
        let start = self.agent_grid();
        let yaw = self.yaw();
        for _ in 0..self.control.waypoint_tries.max(1) {
            let Ok(t) = random_walk_target(&candidates, &mut self.rng_walk) else {
                break;
            };
            if let Ok(plan) = bfs_plan(&nav, start, yaw, &t.destination_set) {
                if !plan.is_empty() {
                    let step = self.steps;
                    self.record(|| TraceEvent::Target {
                        step,
                        grid: t.target_grid,
                        class: String::new(),
                        source: TargetSource::Random,
                    });
                    return plan;
                }
            }
        }
        vec![Action::RotateRight]
    }

    fn is_stale(&self, class: ClassId, g: usize) -> bool {
        let m = self.map.m as i64;
        let (gx, gz) = ((g % self.map.m) as i64, (g / self.map.m) as i64);
        self.moved.iter().any(|&(c, h)| {
            c == class && ((h as i64 % m) - gx).abs() <= 1 && ((h as i64 / m) - gz).abs() <= 1
        })
    }

    /// Best localized grid over `classes`: argmax of `p_obj * p_aff` among
    /// observed grids whose object probability exceeds one half, ties to
    /// the nearer grid and then the smaller index.
    pub fn locate(
        &self,
        classes: &[ClassId],
        affordance: Option<usize>,
        excluded: &[usize],
    ) -> Option<(CoarseTarget, ClassId)> {
        let agent = self.agent_grid();
        let m = self.map.m;
        let (ax, az) = ((agent % m) as i64, (agent / m) as i64);
        let mut best: Option<(f64, i64, usize, ClassId)> = None;
        for &class in classes {
            for &g in self.memory.touched() {
                let p = self.memory.prob(g, class);
                if p <= 0.5 || excluded.contains(&g) || self.is_stale(class, g) {
                    continue;
                }
                let u = p * affordance.map_or(1.0, |a| self.memory.prob(g, a));
                let (dx, dz) = ((g % m) as i64 - ax, (g / m) as i64 - az);
                let d = dx * dx + dz * dz;
                let better = match best {
                    None => true,
                    Some((bu, bd, bg, _)) => u > bu || (u == bu && (d < bd || (d == bd && g < bg))),
                };
                if better {
                    best = Some((u, d, g, class));
                }
            }
        }
        best.map(|(_, _, g, class)| {
            (
                CoarseTarget {
                    target_grid: g,
                    destination_set: destination_set(m, g, DESTINATION_RADIUS),
                    source: TargetSource::ObjectQuery,
                },
                class,
            )
        })
    }

    /// Whether `g` still holds `class` with probability above one half.
    pub fn still_localized(&self, class: ClassId, g: usize) -> bool {
        self.memory.prob(g, class) > 0.5 && !self.is_stale(class, g)
    }

    /// Grid where ray `col` of a `width`-ray frame stops.
    fn hit_grid(&self, col: usize, width: usize, distance: f64) -> Option<usize> {
        let (dx, dz) = bearing_direction(ray_bearing(
            self.pose.yaw as f64,
            col,
            width,
            self.frame.fov_deg,
        ));
        self.map
            .grid_of(self.pose.x + distance * dx, self.pose.z + distance * dz)
    }

    /// Forget moved-object marks near grids where the current frame shows
    /// an instance of the same class that the agent has not handled.
    fn refresh_moved(&mut self) {
        if self.moved.is_empty() {
            return;
        }
        let m = self.map.m as i64;
        let w = self.frame.rays.len();
        let mut sightings: Vec<(ClassId, usize)> = Vec::new();
        for (col, ray) in self.frame.rays.iter().enumerate() {
            let Some(hit) = &ray.hit else { continue };
            let handled = |id: ObjectId| Some(id) == self.held || self.placed_ids.contains(&id);
            let mut seen: Vec<ClassId> = Vec::new();
            if let (Some(c), Some(id)) = (hit.hit_class, hit.hit_object_id) {
                if !handled(id) {
                    seen.push(c);
                }
            }
            seen.extend(
                hit.contents
                    .iter()
                    .filter(|ch| !handled(ch.object_id))
                    .map(|ch| ch.class),
            );
            if seen.is_empty() {
                continue;
            }
            let Some(g) = self.hit_grid(col, w, ray.hit_distance) else {
                continue;
            };
            sightings.extend(seen.into_iter().map(|c| (c, g)));
        }
        self.moved.retain(|&(c, h)| {
            !sightings.iter().any(|&(sc, g)| {
                sc == c
                    && (h as i64 % m - g as i64 % m).abs() <= 1
                    && (h as i64 / m - g as i64 / m).abs() <= 1
            })
        });
    }

    /// The instance of `class` in the last frame whose observed position is
    /// closest to `target_grid`, with its observed affordance bits. An
    /// instance qualifies when no other class is reported for it by more
    /// rays than `class`. With `max_d2`, instances seen farther than that
    /// squared grid distance from the target are ignored.
    pub fn pick_instance(
        &self,
        class: ClassId,
        target_grid: usize,
        skip: &[ObjectId],
        max_d2: Option<i64>,
    ) -> Option<(ObjectId, AffordanceMask)> {
        struct Tally {
            id: ObjectId,
            votes: Vec<(ClassId, usize)>,
            key: (i64, f64),
            aff: AffordanceMask,
        }
        let m = self.map.m as i64;
        let (tx, tz) = (target_grid as i64 % m, target_grid as i64 / m);
        let w = self.frame.rays.len();
        let mut tally: Vec<Tally> = Vec::new();
        for (col, ray) in self.frame.rays.iter().enumerate() {
            let Some(hit) = &ray.hit else { continue };
            let mut seen: Vec<(ObjectId, ClassId, AffordanceMask)> = Vec::new();
            if let (Some(c), Some(id)) = (hit.hit_class, hit.hit_object_id) {
                seen.push((id, c, hit.hit_affordance));
            }
            seen.extend(
                hit.contents
                    .iter()
                    .map(|ch| (ch.object_id, ch.class, ch.affordance)),
            );
            let grid = self.hit_grid(col, w, ray.hit_distance);
            for (id, c, aff) in seen {
                if skip.contains(&id) || Some(id) == self.held {
                    continue;
                }
                let pos = tally.iter().position(|t| t.id == id).unwrap_or_else(|| {
                    tally.push(Tally {
                        id,
                        votes: Vec::new(),
                        key: (i64::MAX, f64::INFINITY),
                        aff,
                    });
                    tally.len() - 1
                });
                let t = &mut tally[pos];
                match t.votes.iter_mut().find(|v| v.0 == c) {
                    Some(v) => v.1 += 1,
                    None => t.votes.push((c, 1)),
                }
                if c == class {
                    let key = grid.map_or((i64::MAX, f64::INFINITY), |g| {
                        let (gx, gz) = (g as i64 % m, g as i64 / m);
                        ((gx - tx).pow(2) + (gz - tz).pow(2), ray.hit_distance)
                    });
                    if key.0 < t.key.0 || (key.0 == t.key.0 && key.1 < t.key.1) {
                        t.key = key;
                        t.aff = aff;
                    }
                }
            }
        }
        tally
            .into_iter()
            .filter(|t| {
                let mine = t.votes.iter().find(|v| v.0 == class).map_or(0, |v| v.1);
                mine > 0
                    && t.votes.iter().all(|v| v.1 <= mine)
                    && max_d2.is_none_or(|d| t.key.0 <= d)
            })
            .min_by(|a, b| {
                a.key
                    .0
                    .cmp(&b.key.0)
                    .then(a.key.1.total_cmp(&b.key.1))
                    .then(a.id.cmp(&b.id))
            })
            .map(|t| (t.id, t.aff))
    }
}
