//! Plan a shortest path over the ground-truth floor of a scene to the
//! cells next to its fridge, then execute it in the simulator.

use std::sync::Arc;

use diffscene::control::{bfs_plan, destination_set, NavMap};
use diffscene::world::{generate_scene, Catalog, RenderConfig, SceneGenConfig, World};

fn main() -> diffscene::Result<()> {
    let catalog = Arc::new(Catalog::default());
    let scene = generate_scene(&SceneGenConfig::default(), catalog.clone(), 5)?;
    assert_eq!(
        scene.width, scene.height,
        "this example indexes the room as a square map"
    );
    let m = scene.width as usize;

    let fridge_class = catalog.id("Fridge").expect("catalog has a fridge");
    let fridge = scene
        .instances_of(fridge_class)
        .next()
        .expect("every room has a fridge");
    let (fx, fz) = scene.root_cell(fridge.id).expect("fridge stands on a cell");
    let target = fz as usize * m + fx as usize;

    let nav = NavMap::new(m, scene.navigability());
    let goals: Vec<usize> = destination_set(m, target, 4)
        .into_iter()
        .filter(|&g| nav.is_navigable(g))
        .collect();
    let (ax, az) = scene.agent_start.cell();
    let start = az as usize * m + ax as usize;
    let plan = bfs_plan(&nav, start, scene.agent_start.yaw, &goals)?;
    println!(
        "fridge at ({fx}, {fz}), agent at ({ax}, {az}), {} candidate goals",
        goals.len()
    );
    println!(
        "plan: {}",
        plan.iter().map(|a| a.name()).collect::<Vec<_>>().join(" ")
    );

    let mut world = World::new(scene, RenderConfig::default());
    for a in &plan {
        let r = world.step(a);
        assert!(r.success, "{} failed: {:?}", a.name(), r.failure);
    }
    let (x, z) = world.agent.cell();
    let d = (((x - fx).pow(2) + (z - fz).pow(2)) as f64).sqrt();
    println!(
        "arrived at ({x}, {z}), {d:.2} cells from the fridge after {} actions",
        plan.len()
    );
    Ok(())
}
