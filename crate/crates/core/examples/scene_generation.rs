//! Generate a seeded room, print it as ASCII and save it as JSON.
//!
//! `cargo run --example scene_generation -- [seed] [out.json]`

use std::sync::Arc;

use diffscene::world::{
    flood_fill, generate_scene, save_scene, Catalog, CellKind, Placement, SceneGenConfig,
};

fn main() -> diffscene::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args
        .next()
        .map_or(Ok(7), |s| s.parse())
        .expect("seed must be an integer");
    let out = args.next();

    let catalog = Arc::new(Catalog::default());
    let scene = generate_scene(&SceneGenConfig::default(), catalog.clone(), seed)?;
    let reach = flood_fill(&scene, scene.agent_start.cell());

    println!(
        "room {}x{}, {} objects, seed {seed}",
        scene.width,
        scene.height,
        scene.objects.len()
    );
    for z in (0..scene.height).rev() {
        let row: String = (0..scene.width)
            .map(|x| {
                if scene.agent_start.cell() == (x, z) {
                    return '@';
                }
                match scene.cell(x, z) {
                    CellKind::Wall => '#',
                    CellKind::ReceptacleSurface => 'R',
                    CellKind::Floor if scene.occupant(x, z).is_some() => 'o',
                    CellKind::Floor if reach[(z * scene.width + x) as usize] => '.',
                    CellKind::Floor => ' ',
                }
            })
            .collect();
        println!("  {row}");
    }
    for o in &scene.objects {
        let place = match o.placement {
            Placement::Cell { x, z } => format!("cell ({x}, {z})"),
            Placement::Inside(p) => format!("inside #{p} {}", scene.class_name(p)),
            Placement::Held => "held".into(),
        };
        println!("  #{:<3} {:<14} {place}", o.id, catalog.name(o.class_id));
    }
    if let Some(path) = out {
        save_scene(std::path::Path::new(&path), &scene)?;
        println!("saved {path}");
    }
    Ok(())
}
