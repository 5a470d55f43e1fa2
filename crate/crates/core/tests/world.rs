//! Scene generation, rendering and action semantics against brute-force
//! oracles.

mod common;

use std::collections::HashSet;

use diffscene::world::{
    flood_fill, generate_scene, is_connected, load_scene, object_visible, render_egocentric,
    save_scene, step, Action, AgentState, CellKind, ClassKind, GridScene, RenderConfig,
    SceneGenConfig, Yaw,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Depth-first reachability with an explicit stack.
fn reachable_dfs(scene: &GridScene, start: (i32, i32)) -> HashSet<(i32, i32)> {
    let mut seen = HashSet::new();
    if !scene.is_navigable(start.0, start.1) {
        return seen;
    }
    let mut stack = vec![start];
    while let Some((x, z)) = stack.pop() {
        if !seen.insert((x, z)) {
            continue;
        }
        for (nx, nz) in [(x + 1, z), (x - 1, z), (x, z + 1), (x, z - 1)] {
            if scene.is_navigable(nx, nz) && !seen.contains(&(nx, nz)) {
                stack.push((nx, nz));
            }
        }
    }
    seen
}

#[test]
fn hundred_generated_scenes_are_connected_and_deterministic() {
    let cfg = SceneGenConfig::default();
    for seed in 0..100 {
        let a = generate_scene(&cfg, common::catalog(), seed).unwrap();
        let b = generate_scene(&cfg, common::catalog(), seed).unwrap();
        assert_eq!(a, b, "seed {seed}");
        assert!(is_connected(&a), "seed {seed}");
        let start = a.agent_start.cell();
        let dfs = reachable_dfs(&a, start);
        let all: HashSet<(i32, i32)> = (0..a.height)
            .flat_map(|z| (0..a.width).map(move |x| (x, z)))
            .filter(|&(x, z)| a.is_navigable(x, z))
            .collect();
        assert_eq!(dfs, all, "seed {seed}: some floor is cut off");
    }
}

#[test]
fn flood_fill_matches_depth_first_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 0..40 {
        let mut scene = common::room(14, seed);
        // knock out random floor cells to create islands
        for _ in 0..30 {
            let (x, z) = (rng.gen_range(1..13), rng.gen_range(1..13));
            if scene.cell(x, z) == CellKind::Floor && scene.occupant(x, z).is_none() {
                scene.set_cell(x, z, CellKind::Wall);
            }
        }
        let start = (rng.gen_range(1..13), rng.gen_range(1..13));
        let fill = flood_fill(&scene, start);
        let dfs = reachable_dfs(&scene, start);
        for z in 0..scene.height {
            for x in 0..scene.width {
                assert_eq!(
                    fill[(z * scene.width + x) as usize],
                    dfs.contains(&(x, z)),
                    "seed {seed} cell ({x}, {z})"
                );
            }
        }
    }
}

/// Slab-method entry and exit of the ray `origin + t * dir` through the
/// unit cell `(x, z)`, in cell units.
fn slab(origin: (f64, f64), dir: (f64, f64), x: i32, z: i32) -> Option<(f64, f64)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (o, d, c) in [(origin.0, dir.0, x as f64), (origin.1, dir.1, z as f64)] {
        if d.abs() < 1e-15 {
            if o < c || o >= c + 1.0 {
                return None;
            }
        } else {
            let (a, b) = ((c - o) / d, (c + 1.0 - o) / d);
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
    }
    (hi > lo.max(0.0)).then_some((lo.max(0.0), hi))
}

fn seen_vertically(bottom: f64, top: f64, d: f64, horizon: i32) -> bool {
    let d = d.max(1e-9);
    let up = (1.5 - top).atan2(d).to_degrees();
    let down = (1.5 - bottom).atan2(d).to_degrees();
    up <= horizon as f64 + 30.0 && down >= horizon as f64 - 30.0
}

/// First visible entity along one ray, found by testing every cell of the
/// room: `(distance in meters, object id)`, `None` id for walls.
fn brute_force_hit(
    scene: &GridScene,
    agent: &AgentState,
    col: usize,
) -> Option<(f64, Option<u32>)> {
    let bearing = (agent.yaw.degrees() as f64 + 60.0 * (col as f64 / 120.0 - 0.5)).to_radians();
    let dir = (bearing.sin(), bearing.cos());
    let origin = (agent.x as f64 + 0.5, agent.z as f64 + 0.5);
    let mut crossed: Vec<(f64, f64, i32, i32)> = Vec::new();
    for z in 0..scene.height {
        for x in 0..scene.width {
            if (x, z) == (agent.x, agent.z) {
                continue;
            }
            if let Some((t0, t1)) = slab(origin, dir, x, z) {
                if t1 - t0 >= 1e-6 {
                    crossed.push((t0, t1, x, z));
                }
            }
        }
    }
    crossed.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (t0, t1, x, z) in crossed {
        let mid = 0.5 * (t0 + t1);
        if t0 > 20.0 || mid > 20.0 {
            return None;
        }
        let d = mid * 0.25;
        if scene.cell(x, z) == CellKind::Wall {
            return seen_vertically(0.0, 2.5, d, agent.horizon).then_some((d, None));
        }
        if let Some(id) = scene.occupant(x, z) {
            let info = scene.catalog.get(scene.class_of(id));
            let (bottom, top) = if info.kind == ClassKind::Fixed {
                info.height
            } else {
                (0.0, info.height.1)
            };
            if seen_vertically(bottom, top, d, agent.horizon) {
                return Some((d, Some(id)));
            }
            if top >= 1.5 {
                return None;
            }
        }
    }
    None
}

#[test]
fn rendered_hits_match_brute_force_occlusion() {
    let cfg = RenderConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    for seed in 0..10 {
        let scene = generate_scene(&SceneGenConfig::default(), common::catalog(), seed).unwrap();
        let free: Vec<(i32, i32)> = (0..scene.height)
            .flat_map(|z| (0..scene.width).map(move |x| (x, z)))
            .filter(|&(x, z)| scene.is_navigable(x, z))
            .collect();
        for _ in 0..20 {
            let &(x, z) = free.choose(&mut rng).unwrap();
            let agent = AgentState {
                horizon: [-30, 0, 15, 30, 45, 60][rng.gen_range(0..6)],
                ..AgentState::new(x, z, Yaw::from_degrees(90 * rng.gen_range(0..4)))
            };
            let frame = render_egocentric(&scene, &agent, &cfg);
            for (col, ray) in frame.rays.iter().enumerate() {
                let oracle = brute_force_hit(&scene, &agent, col);
                let got = ray
                    .hit
                    .as_ref()
                    .map(|h| (ray.hit_distance, h.hit_object_id));
                match (got, oracle) {
                    (None, None) => {}
                    (Some((d, id)), Some((e, oid))) => {
                        assert_eq!(id, oid, "seed {seed} {agent:?} column {col}");
                        assert!(
                            (d - e).abs() < 1e-9,
                            "seed {seed} {agent:?} column {col}: {d} vs {e}"
                        );
                    }
                    (g, o) => {
                        panic!("seed {seed} {agent:?} column {col}: render {g:?}, oracle {o:?}")
                    }
                }
                checked += 1;
            }
            for o in &scene.objects {
                assert_eq!(
                    object_visible(&scene, &agent, o.id, &cfg),
                    frame.sees_object(o.id),
                    "object {}",
                    o.id
                );
            }
        }
    }
    assert_eq!(checked, 10 * 20 * 120);
}

#[test]
fn scenes_survive_a_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..5 {
        let scene = common::room(16, seed);
        let path = dir.path().join(format!("s{seed}.json"));
        save_scene(&path, &scene).unwrap();
        assert_eq!(load_scene(&path).unwrap(), scene);
    }
}

fn any_action(n_objects: u32) -> impl Strategy<Value = Action> {
    let id = 0..n_objects;
    prop_oneof![
        Just(Action::MoveAhead),
        Just(Action::RotateLeft),
        Just(Action::RotateRight),
        Just(Action::LookUp),
        Just(Action::LookDown),
        Just(Action::MoveLeft),
        Just(Action::MoveRight),
        Just(Action::MoveBack),
        id.clone().prop_map(Action::PickUp),
        id.clone().prop_map(Action::Put),
        id.clone().prop_map(Action::Open),
        id.clone().prop_map(Action::Close),
        id.clone().prop_map(Action::ToggleOn),
        id.clone().prop_map(Action::ToggleOff),
        id.prop_map(Action::Slice),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn failed_actions_change_nothing(seed in 0u64..1000, actions in prop::collection::vec(any_action(20), 1..80)) {
        let mut scene = common::room(12, seed);
        let mut agent = scene.agent_start;
        let cfg = RenderConfig::default();
        for a in actions {
            let (s0, a0) = (scene.clone(), agent);
            let r = step(&mut scene, &mut agent, &a, &cfg);
            if !r.success {
                prop_assert!(r.failure.is_some());
                prop_assert_eq!(&scene, &s0);
                prop_assert_eq!(agent, a0);
            }
            prop_assert!(scene.held_count() <= 1);
            prop_assert!(scene.is_navigable(agent.x, agent.z));
        }
    }
}
