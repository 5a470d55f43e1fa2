//! Procedural scene generation.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::catalog::{AffordanceMask, Catalog, ClassId, ClassKind};
use super::scene::{AgentState, CellKind, GridScene, Placement, Yaw};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneGenConfig {
    /// Room size in cells, border walls included.
    pub width: i32,
    pub height: i32,
    /// Internal wall segments attached to the outer wall.
    pub internal_walls: usize,
    /// Fixed classes to place, one instance each; `None` means every fixed
    /// class in the catalog.
    pub fixed_classes: Option<Vec<String>>,
    /// Small objects that must be present. Repeats request several
    /// instances. These are always placed somewhere visible.
    pub required_classes: Vec<String>,
    /// Total number of small objects, required ones included.
    pub small_objects: usize,
    /// Probability that a non-required small object goes into a receptacle
    /// rather than onto the floor.
    pub contained_fraction: f64,
    pub max_retries: usize,
}

impl Default for SceneGenConfig {
    fn default() -> Self {
        SceneGenConfig {
            width: 20,
            height: 20,
            internal_walls: 2,
            fixed_classes: None,
            required_classes: Vec::new(),
            small_objects: 11,
            contained_fraction: 0.6,
            max_retries: 64,
        }
    }
}

/// Navigable cells reachable from `start` by 4-connected moves.
pub fn flood_fill(scene: &GridScene, start: (i32, i32)) -> Vec<bool> {
    let w = scene.width;
    let mut seen = vec![false; (scene.width * scene.height) as usize];
    if !scene.is_navigable(start.0, start.1) {
        return seen;
    }
    let mut queue = VecDeque::from([start]);
    seen[(start.1 * w + start.0) as usize] = true;
    while let Some((x, z)) = queue.pop_front() {
        for (dx, dz) in [(0, 1), (1, 0), (0, -1), (-1, 0)] {
            let (nx, nz) = (x + dx, z + dz);
            if scene.is_navigable(nx, nz) && !seen[(nz * w + nx) as usize] {
                seen[(nz * w + nx) as usize] = true;
                queue.push_back((nx, nz));
            }
        }
    }
    seen
}

/// All navigable cells form one 4-connected component.
pub fn is_connected(scene: &GridScene) -> bool {
    let nav = scene.navigability();
    let Some(first) = nav.iter().position(|&n| n) else {
        return true;
    };
    let start = ((first as i32) % scene.width, (first as i32) / scene.width);
    let reach = flood_fill(scene, start);
    nav.iter().zip(&reach).all(|(n, r)| !n || *r)
}

/// Every object standing on a cell has a navigable 4-neighbor.
pub fn objects_approachable(scene: &GridScene) -> bool {
    scene.objects.iter().all(|o| match o.placement {
        Placement::Cell { x, z } => [(0, 1), (1, 0), (0, -1), (-1, 0)]
            .iter()
            .any(|(dx, dz)| scene.is_navigable(x + dx, z + dz)),
        _ => true,
    })
}

fn valid_layout(scene: &GridScene) -> bool {
    is_connected(scene) && objects_approachable(scene)
}

fn resolve(catalog: &Catalog, name: &str) -> Result<ClassId> {
    catalog
        .id(name)
        .ok_or_else(|| Error::Config(format!("unknown class {name:?}")))
}

/// Generate a connected scene. The same config and seed always give the
/// same scene.
pub fn generate_scene(
    config: &SceneGenConfig,
    catalog: Arc<Catalog>,
    seed: u64,
) -> Result<GridScene> {
    if config.width < 4 || config.height < 4 {
        return Err(Error::Config(format!(
            "room {}x{} too small",
            config.width, config.height
        )));
    }
    let fixed: Vec<ClassId> = match &config.fixed_classes {
        None => (0..catalog.len())
            .filter(|&c| catalog.get(c).kind == ClassKind::Fixed)
            .collect(),
        Some(names) => names
            .iter()
            .map(|n| resolve(&catalog, n))
            .collect::<Result<_>>()?,
    };
    let required: Vec<ClassId> = config
        .required_classes
        .iter()
        .map(|n| resolve(&catalog, n))
        .collect::<Result<_>>()?;
    for &c in &required {
        if catalog.get(c).kind != ClassKind::Small {
            return Err(Error::Config(format!(
                "required class {} is not a small object",
                catalog.name(c)
            )));
        }
    }
    let small_pool: Vec<ClassId> = (0..catalog.len())
        .filter(|&c| catalog.get(c).kind == ClassKind::Small)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..config.max_retries.max(1) {
        if let Some(scene) = try_generate(
            config,
            &catalog,
            &fixed,
            &required,
            &small_pool,
            seed,
            &mut rng,
        ) {
            return Ok(scene);
        }
    }
    Err(Error::Config(format!(
        "could not place all objects after {} attempts",
        config.max_retries
    )))
}

fn try_generate(
    config: &SceneGenConfig,
    catalog: &Arc<Catalog>,
    fixed: &[ClassId],
    required: &[ClassId],
    small_pool: &[ClassId],
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Option<GridScene> {
    let (w, h) = (config.width, config.height);
    let mut scene = GridScene::empty(w, h, catalog.clone(), seed);

    for _ in 0..config.internal_walls {
        add_wall_segment(&mut scene, rng);
    }
    if !is_connected(&scene) {
        return None;
    }

    // Fixed furniture goes against walls so the room stays open.
    for &class in fixed {
        let mut candidates: Vec<(i32, i32)> = floor_cells(&scene)
            .into_iter()
            .filter(|&(x, z)| touches_wall(&scene, x, z))
            .collect();
        candidates.shuffle(rng);
        let placed = candidates
            .into_iter()
            .take(24)
            .any(|(x, z)| try_place_on_cell(&mut scene, class, x, z));
        if !placed {
            return None;
        }
    }

    let surfaces: Vec<_> = scene
        .objects
        .iter()
        .filter(|o| {
            o.affordance_flags.contains(AffordanceMask::RECEPTACLE)
                && !o.affordance_flags.contains(AffordanceMask::OPENABLE)
        })
        .map(|o| o.id)
        .collect();
    let receptacles: Vec<_> = scene
        .objects
        .iter()
        .filter(|o| o.affordance_flags.contains(AffordanceMask::RECEPTACLE))
        .map(|o| o.id)
        .collect();

    let extra = config.small_objects.saturating_sub(required.len());
    let mut smalls: Vec<(ClassId, bool)> = required.iter().map(|&c| (c, true)).collect();
    for _ in 0..extra {
        smalls.push((*small_pool.choose(rng)?, false));
    }
    for (class, visible) in smalls {
        let into_receptacle = rng.gen::<f64>() < config.contained_fraction.clamp(0.0, 1.0);
        let pool = if visible { &surfaces } else { &receptacles };
        if into_receptacle && !pool.is_empty() {
            let r = *pool.choose(rng)?;
            scene.add_object(class, Placement::Inside(r));
            continue;
        }
        let mut cells = floor_cells(&scene);
        cells.shuffle(rng);
        if !cells
            .into_iter()
            .take(24)
            .any(|(x, z)| try_place_on_cell(&mut scene, class, x, z))
        {
            return None;
        }
    }

    let free = floor_cells(&scene);
    let &(x, z) = free.choose(rng)?;
    scene.agent_start = AgentState::new(x, z, Yaw(rng.gen_range(0..4)));
    Some(scene)
}

fn floor_cells(scene: &GridScene) -> Vec<(i32, i32)> {
    let mut out = Vec::new();
    for z in 0..scene.height {
        for x in 0..scene.width {
            if scene.is_navigable(x, z) {
                out.push((x, z));
            }
        }
    }
    out
}

fn touches_wall(scene: &GridScene, x: i32, z: i32) -> bool {
    [(0, 1), (1, 0), (0, -1), (-1, 0)]
        .iter()
        .any(|(dx, dz)| scene.cell(x + dx, z + dz) == CellKind::Wall)
}

/// Place an object on a free cell if the layout stays valid.
fn try_place_on_cell(scene: &mut GridScene, class: ClassId, x: i32, z: i32) -> bool {
    let before_kind = scene.cell(x, z);
    let id = scene.add_object(class, Placement::Cell { x, z });
    if valid_layout(scene) {
        return true;
    }
    scene.objects.truncate(id as usize);
    scene.set_cell(x, z, before_kind);
    scene.reindex();
    false
}

/// A straight wall growing from the outer wall with its far end open.
fn add_wall_segment(scene: &mut GridScene, rng: &mut ChaCha8Rng) {
    let (w, h) = (scene.width, scene.height);
    let vertical = rng.gen_bool(0.5);
    let (span, across) = if vertical { (h - 2, w) } else { (w - 2, h) };
    if across < 8 || span < 4 {
        return;
    }
    let pos = rng.gen_range(3..across - 3);
    let len = rng.gen_range(span / 3..=(2 * span) / 3);
    let from_start = rng.gen_bool(0.5);
    for k in 0..len {
        let t = if from_start { 1 + k } else { span - k };
        let (x, z) = if vertical { (pos, t) } else { (t, pos) };
        if scene.occupant(x, z).is_none() {
            scene.set_cell(x, z, CellKind::Wall);
        }
    }
}
