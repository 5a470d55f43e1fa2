//! Projection, binning and pose tracking against ground truth.

mod common;

use diffscene::control::{Agent, AgentSetup};
use diffscene::mapping::{
    bin_points, project_frame, soft_labels, ClassSet, MapConfig, PoseEstimate, SemanticPoint,
    SemanticPoints,
};
use diffscene::world::{
    render_egocentric, Action, AgentState, NoiseModel, RenderConfig, World, Yaw,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every reachable pose of a scene, each heading, default pitch.
fn poses(scene: &diffscene::world::GridScene) -> Vec<AgentState> {
    let mut out = Vec::new();
    for z in 0..scene.height {
        for x in 0..scene.width {
            if scene.is_navigable(x, z) {
                for yaw in [0, 90, 180, 270] {
                    out.push(AgentState {
                        horizon: 30,
                        ..AgentState::new(x, z, Yaw::from_degrees(yaw))
                    });
                }
            }
        }
    }
    out
}

#[test]
fn hits_project_into_the_cell_of_the_hit_object() {
    let scene = common::room(14, 4);
    let cfg = RenderConfig::default();
    let map = MapConfig::default();
    let start = scene.agent_start.cell();
    let mut checked = 0;
    for agent in poses(&scene) {
        let frame = render_egocentric(&scene, &agent, &cfg);
        let (ax, az) = agent.cell();
        let pose = PoseEstimate {
            x: (ax - start.0) as f64 * 0.25,
            z: (az - start.1) as f64 * 0.25,
            yaw: agent.yaw.degrees(),
            horizon: agent.horizon,
        };
        let points = project_frame(&frame, &pose, &scene.catalog);
        // One point per ray with a hit, in ray order, then the floor samples.
        let hits = frame.rays.iter().filter_map(|r| r.hit.as_ref());
        for (p, hit) in points.points.iter().zip(hits) {
            let Some(id) = hit.hit_object_id else {
                continue;
            };
            let (ox, oz) = scene.root_cell(id).unwrap();
            let expect = map.grid_of_offset(ox - start.0, oz - start.1);
            assert_eq!(
                map.grid_of(p.x, p.z),
                expect,
                "object {id} seen from {agent:?}"
            );
            checked += 1;
        }
    }
    assert!(checked > 1000, "only {checked} hits checked");
}

#[test]
fn class_flip_rate_matches_configuration() {
    let scene = common::room(14, 8);
    let cfg = RenderConfig::default();
    let noise = NoiseModel {
        class_flip: 0.2,
        ..NoiseModel::default()
    };
    let n = scene.catalog.len();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut flipped, mut total) = (0usize, 0usize);
    for agent in poses(&scene) {
        let clean = render_egocentric(&scene, &agent, &cfg);
        let mut noisy = clean.clone();
        noisy.apply_noise(&noise, n, &mut rng);
        for (a, b) in clean.rays.iter().zip(&noisy.rays) {
            let (Some(a), Some(b)) = (&a.hit, &b.hit) else {
                continue;
            };
            if let (Some(x), Some(y)) = (a.hit_class, b.hit_class) {
                total += 1;
                flipped += usize::from(x != y);
            }
            for (x, y) in a.contents.iter().zip(&b.contents) {
                total += 1;
                flipped += usize::from(x.class != y.class);
            }
        }
    }
    let rate = flipped as f64 / total as f64;
    assert!(total > 10_000, "only {total} labels");
    assert!(
        (rate - 0.2).abs() <= 0.02,
        "flip rate {rate} over {total} labels"
    );
}

#[test]
fn pose_estimate_tracks_the_simulator_over_random_actions() {
    let scene = common::room(16, 21);
    let start = scene.agent_start.cell();
    let world = World::new(scene, RenderConfig::default());
    let mut agent = Agent::new(
        world,
        &AgentSetup {
            repr: diffscene::scene_repr::ReprConfig {
                c: 8,
                ..Default::default()
            },
            ..AgentSetup::default()
        },
        None,
    )
    .unwrap();
    let actions = [
        Action::MoveAhead,
        Action::MoveAhead,
        Action::RotateLeft,
        Action::RotateRight,
        Action::LookUp,
        Action::LookDown,
        Action::MoveLeft,
        Action::MoveRight,
        Action::MoveBack,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        agent.execute(*actions.choose(&mut rng).unwrap());
        let truth = agent.world.agent;
        let (x, z) = truth.cell();
        assert_eq!(agent.pose.cell_offset(), (x - start.0, z - start.1));
        assert_eq!(agent.pose.yaw, truth.yaw.degrees());
        assert_eq!(agent.pose.horizon, truth.horizon);
    }
}

fn cloud() -> impl Strategy<Value = Vec<(f64, f64, u128)>> {
    prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, 0u128..64), 1..300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn soft_labels_are_normalized(points in cloud(), rho in 0u32..5) {
        let cfg = MapConfig { m: 20, rho };
        let pts = SemanticPoints {
            points: points.iter().map(|&(x, z, bits)| SemanticPoint { x, z, classes: ClassSet(bits) }).collect(),
        };
        let obs = bin_points(&pts, &cfg, 6).unwrap();
        prop_assert_eq!(obs.total_points() as usize + obs.dropped, points.len());
        let labels = soft_labels(&obs, rho);
        for j in 0..6 {
            let present = points.iter().any(|p| p.2 >> j & 1 == 1 && cfg.grid_of(p.0, p.1).is_some());
            let max = labels.grids.iter().map(|g| g.y[j]).fold(0.0, f64::max);
            prop_assert!(labels.grids.iter().all(|g| (0.0..=1.0).contains(&g.y[j])));
            prop_assert_eq!(max, if present { 1.0 } else { 0.0 });
        }
        for g in &labels.grids {
            prop_assert_eq!(g.visible, g.c > rho);
        }
    }
}

#[test]
fn anchored_pose_starts_at_the_center_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cfg = MapConfig::default();
    for _ in 0..10 {
        let a = AgentState::new(
            rng.gen_range(1..10),
            rng.gen_range(1..10),
            Yaw::from_degrees(90 * rng.gen_range(0..4)),
        );
        let p = PoseEstimate::anchored(&a);
        assert_eq!(cfg.grid_of(p.x, p.z), Some(cfg.m / 2 * cfg.m + cfg.m / 2));
    }
}
