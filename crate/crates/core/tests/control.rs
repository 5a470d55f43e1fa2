//! Planner, targeting and subgoal state machine.

mod common;

use std::collections::BTreeMap;

use diffscene::control::{
    bfs_plan, coarse_target, coarse_target_where, random_walk_target, run_subgoal, AblationMode,
    Agent, AgentSetup, PolicyParams, TraceEvent,
};
use diffscene::mapping::{LabeledGrid, SoftLabels};
use diffscene::planner::{Subgoal, Verb};
use diffscene::scene_repr::{CellMap, ReprConfig, SceneMemory};
use diffscene::world::{
    Action, Affordance, CellKind, GridScene, Placement, RenderConfig, World, Yaw,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bfs_cost_matches_uniform_cost_search(seed in any::<u64>(), m in 3usize..14) {
        let (nav, start, yaw, goals) = common::ucs::random_case(seed, m);
        let oracle = common::ucs::cost(&nav, start, yaw, &goals);
        match bfs_plan(&nav, start, yaw, &goals) {
            Ok(plan) => {
                prop_assert_eq!(Some(plan.len()), oracle);
                let end = common::ucs::replay(&nav, start, yaw, &plan);
                prop_assert!(end.is_some_and(|g| goals.contains(&g)));
            }
            Err(_) => prop_assert_eq!(oracle, None),
        }
    }
}

#[test]
fn waypoints_are_uniform_over_candidates() {
    let candidates: Vec<usize> = (100..110).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let draws = 10_000;
    for _ in 0..draws {
        *counts
            .entry(
                random_walk_target(&candidates, &mut rng)
                    .unwrap()
                    .target_grid,
            )
            .or_default() += 1;
    }
    assert_eq!(counts.len(), 10);
    let expected = draws as f64 / 10.0;
    let mut chi2 = 0.0;
    for (&g, &c) in &counts {
        let freq = c as f64 / draws as f64;
        assert!(
            (freq - 0.1).abs() <= 0.05,
            "grid {g} drawn with frequency {freq}"
        );
        chi2 += (c as f64 - expected).powi(2) / expected;
    }
    // 99.9th percentile of chi-square with 9 degrees of freedom
    assert!(chi2 < 27.88, "chi-square {chi2} for counts {counts:?}");
}

fn cell_map_with(m: usize, n: usize, entries: &[(usize, Vec<f64>)]) -> CellMap {
    let mut map = CellMap::new(m, n).unwrap();
    map.update(&SoftLabels {
        rho: 0,
        n_classes: n,
        grids: entries
            .iter()
            .map(|(i, y)| LabeledGrid {
                index: *i,
                c: 10,
                visible: true,
                y: y.clone(),
            })
            .collect(),
    });
    map
}

#[test]
fn affordance_support_decides_the_target() {
    // Object class 0 is seen on three grids; only one of them carries
    // affordance class 1.
    let map = cell_map_with(
        10,
        2,
        &[
            (11, vec![1.0, 0.0]),
            (55, vec![1.0, 1.0]),
            (88, vec![1.0, 0.0]),
        ],
    );
    let t = coarse_target(&map, 0, Some(1), 12).unwrap();
    assert_eq!(t.target_grid, 55);
    let t = coarse_target(&map, 0, None, 12).unwrap();
    assert_eq!(
        t.target_grid, 11,
        "without the affordance the nearest grid wins"
    );
}

#[test]
fn locate_agrees_with_the_masked_map_argmax() {
    let scene = common::room(12, 3);
    let setup = AgentSetup {
        repr: ReprConfig {
            c: 32,
            ..ReprConfig::default()
        },
        ..AgentSetup::default()
    };
    let agent = common::scripted_tour(&scene, &setup);
    let n_obj = scene.catalog.len();
    let receptacle = Some(scene.catalog.affordance_index(Affordance::Receptacle));
    let mut compared = 0;
    for class in 0..n_obj {
        for aff in [None, receptacle] {
            let touched = agent.memory.touched().to_vec();
            let oracle = coarse_target_where(
                agent.memory.as_ref(),
                class,
                aff,
                agent.agent_grid(),
                4,
                |g| touched.contains(&g) && agent.memory.prob(g, class) > 0.5,
            );
            let got = agent.locate(&[class], aff, &[]);
            let oracle = oracle.filter(|t| agent.memory.prob(t.target_grid, class) > 0.5);
            assert_eq!(
                got.map(|(t, _)| t.target_grid),
                oracle.map(|t| t.target_grid),
                "class {class}"
            );
            compared += 1;
        }
    }
    assert_eq!(compared, 2 * n_obj);
}

/// A trained flag on all-zero weights: the policy always answers with
/// the first fine action, which keeps the fine phase busy and exercises
/// every exit of the state machine.
fn degenerate_policy(n: usize) -> PolicyParams {
    PolicyParams {
        trained: true,
        ..PolicyParams::zeros(n, 0)
    }
}

#[test]
fn subgoals_end_within_their_budget() {
    let policy = degenerate_policy(common::catalog().len());
    let verbs = [
        Verb::PickUp,
        Verb::Put,
        Verb::Toggle,
        Verb::GotoLocation,
        Verb::Slice,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for seed in 0..30u64 {
        let scene = common::room(14, 300 + seed);
        let names: Vec<String> = scene
            .objects
            .iter()
            .map(|o| scene.class_name(o.id).to_string())
            .collect();
        let noun = &names[rng.gen_range(0..names.len())];
        let verb = verbs[rng.gen_range(0..verbs.len())];
        for mode in ["full", "no-coarse", "no-fine", "no-differentiable"] {
            let setup = AgentSetup {
                mode: AblationMode::from_name(mode).unwrap(),
                repr: ReprConfig {
                    c: 32,
                    ..ReprConfig::default()
                },
                seed,
                ..AgentSetup::default()
            };
            let world = World::new(scene.clone(), RenderConfig::default());
            let mut agent = Agent::new(world, &setup, Some(&policy)).unwrap();
            let budget = 150;
            let r = run_subgoal(&mut agent, &Subgoal::new(verb, noun), budget).unwrap();
            // a composed move may straddle the budget by its extra steps
            assert!(
                r.steps <= budget + 4,
                "{mode} {verb:?} {noun}: {} steps",
                r.steps
            );
            assert!(r.success || r.failure.is_some());
            assert!(r.attempts <= setup.control.retries);
        }
    }
}

/// An apple boxed in by walls can be neither seen nor reached.
#[test]
fn walled_off_target_fails_cleanly() {
    let catalog = common::catalog();
    let mut scene = GridScene::empty(12, 12, catalog.clone(), 0);
    for (x, z) in [(2, 1), (1, 2), (2, 3), (3, 2)] {
        scene.set_cell(x, z, CellKind::Wall);
    }
    scene.add_object(catalog.id("Apple").unwrap(), Placement::Cell { x: 2, z: 2 });
    scene.agent_start = diffscene::world::AgentState::new(8, 8, Yaw::from_degrees(0));
    let policy = degenerate_policy(catalog.len());
    let setup = AgentSetup {
        repr: ReprConfig {
            c: 32,
            ..ReprConfig::default()
        },
        ..AgentSetup::default()
    };
    let mut agent = Agent::new(
        World::new(scene, RenderConfig::default()),
        &setup,
        Some(&policy),
    )
    .unwrap();
    let r = run_subgoal(&mut agent, &Subgoal::new(Verb::PickUp, "Apple"), 300).unwrap();
    assert!(!r.success);
    assert!(r.failure.is_some());
    assert!(agent.held.is_none());
}

#[test]
fn visible_target_in_reach_needs_no_coarse_moves() {
    let catalog = common::catalog();
    let mut scene = GridScene::empty(12, 12, catalog.clone(), 0);
    scene.agent_start = diffscene::world::AgentState::new(6, 5, Yaw::from_degrees(0));
    scene.add_object(catalog.id("Apple").unwrap(), Placement::Cell { x: 6, z: 7 });
    // no fine control: the interaction runs straight after alignment
    let setup = AgentSetup {
        mode: AblationMode::from_name("no-fine").unwrap(),
        repr: ReprConfig {
            c: 32,
            ..ReprConfig::default()
        },
        trace: true,
        ..AgentSetup::default()
    };
    let mut agent = Agent::new(World::new(scene, RenderConfig::default()), &setup, None).unwrap();
    for _ in 0..4 {
        agent.execute(Action::RotateRight);
    }
    let before = agent.steps;
    let r = run_subgoal(&mut agent, &Subgoal::new(Verb::PickUp, "Apple"), 100).unwrap();
    assert!(r.success, "{r:?}");
    let moves = agent.trace.as_ref().unwrap().iter().filter(|e| {
        matches!(e, TraceEvent::Action { action, success: true, .. } if action.starts_with("Move"))
    });
    assert_eq!(moves.count(), 0);
    assert!(
        agent.steps - before <= 8,
        "took {} steps",
        agent.steps - before
    );
}
