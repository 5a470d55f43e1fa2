//! Explore a room with random-walk segments and compare the embedding map
//! against the binary cell map on the floor class.
//!
//! Writes `mapping_diff.ppm` and `mapping_cell.ppm` (navigable probability,
//! trajectory in black) into the directory given as the first argument,
//! default the system temp directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use diffscene::control::{AblationMode, Agent, AgentSetup};
use diffscene::scene_repr::export::write_ppm;
use diffscene::world::{
    generate_scene, Action, Affordance, Catalog, NoiseModel, RenderConfig, SceneGenConfig, World,
};

fn explore(mode: AblationMode, noise: f64, out: &Path, name: &str) -> diffscene::Result<()> {
    let catalog = Arc::new(Catalog::default());
    let scene = generate_scene(&SceneGenConfig::default(), catalog.clone(), 11)?;
    let setup = AgentSetup {
        mode,
        noise: NoiseModel {
            class_flip: noise,
            ..NoiseModel::default()
        },
        ..AgentSetup::default()
    };
    let start = scene.agent_start.cell();
    let world = World::new(scene.clone(), RenderConfig::default());
    let mut agent = Agent::new(world, &setup, None)?;

    let mut trail = vec![agent.agent_grid()];
    for _ in 0..4 {
        agent.execute(Action::RotateRight);
    }
    for _ in 0..6 {
        for a in agent.random_walk_plan() {
            if !agent.execute(a).success {
                break;
            }
            trail.push(agent.agent_grid());
        }
    }

    // Score navigability on every grid the map has evidence for.
    let nav = catalog.affordance_index(Affordance::Navigable);
    let (mut right, mut total) = (0, 0);
    for &g in agent.memory.touched() {
        let (dx, dz) = agent.map.offset_of(g);
        let (x, z) = (start.0 + dx, start.1 + dz);
        let truth = scene.is_navigable(x, z);
        right += usize::from((agent.memory.prob(g, nav) > 0.5) == truth);
        total += 1;
    }
    // Object classes: micro-averaged IoU of `p > 0.5` against the cells
    // holding an instance, over the grids the map has evidence for.
    let (mut inter, mut union) = (0, 0);
    for &g in agent.memory.touched() {
        let (dx, dz) = agent.map.offset_of(g);
        let cell = (start.0 + dx, start.1 + dz);
        for j in 0..catalog.len() {
            let truth = scene
                .instances_of(j)
                .any(|o| scene.root_cell(o.id) == Some(cell));
            let pred = agent.memory.prob(g, j) > 0.5;
            inter += usize::from(truth && pred);
            union += usize::from(truth || pred);
        }
    }
    println!(
        "{name:<5} steps {:>4}  grids {:>4}  navigable agreement {:.3}  object IoU {:.3}",
        agent.steps,
        total,
        right as f64 / total.max(1) as f64,
        inter as f64 / union.max(1) as f64
    );

    let overlay: Vec<(usize, [u8; 3])> = trail.iter().map(|&g| (g, [0, 0, 0])).collect();
    let path = out.join(format!("mapping_{name}.ppm"));
    write_ppm(&path, &agent.memory.query(nav)?, 4, &overlay)?;
    println!("      wrote {}", path.display());
    Ok(())
}

fn main() -> diffscene::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map_or_else(std::env::temp_dir, PathBuf::from);
    let noise = 0.2;
    println!("class flip rate {noise}");
    let cell = AblationMode {
        differentiable: false,
        ..AblationMode::FULL
    };
    explore(AblationMode::FULL, noise, &out, "diff")?;
    explore(cell, noise, &out, "cell")?;
    Ok(())
}
