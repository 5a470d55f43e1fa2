//! Properties of the embedding map and the cell baseline.

mod common;

use diffscene::control::{AblationMode, AgentSetup};
use diffscene::mapping::{LabeledGrid, SoftLabels};
use diffscene::scene_repr::{CellMap, DiffMap, ReprConfig, SceneMemory};
use diffscene::world::NoiseModel;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn labels(n: usize, grids: Vec<(usize, bool, Vec<f64>)>) -> SoftLabels {
    SoftLabels {
        rho: 0,
        n_classes: n,
        grids: grids
            .into_iter()
            .map(|(index, visible, y)| LabeledGrid {
                index,
                c: 10,
                visible,
                y,
            })
            .collect(),
    }
}

fn small_cfg(c: usize, iters: usize) -> ReprConfig {
    ReprConfig {
        c,
        iters,
        ..ReprConfig::default()
    }
}

#[test]
fn gradients_match_finite_differences_on_s_and_q() {
    for seed in 0..20 {
        let (map, l) = common::fd::instance(seed, 8);
        let err = common::fd::max_relative_error(&map, &l);
        assert!(err < 1e-5, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn one_iteration_is_a_simultaneous_gradient_step() {
    let (mut map, l) = common::fd::instance(3, 8);
    let mut cfg = *map.config();
    cfg.iters = 1;
    map = DiffMap::from_parts(4, l.n_classes, map.s().to_vec(), map.q().to_vec(), cfg).unwrap();
    let (gs, gq) = map.gradients(&l);
    let expect_s: Vec<f64> = map
        .s()
        .iter()
        .zip(&gs)
        .map(|(s, g)| s - cfg.alpha * g)
        .collect();
    let expect_q: Vec<f64> = map
        .q()
        .iter()
        .zip(&gq)
        .map(|(q, g)| q - cfg.alpha * g)
        .collect();
    map.update_with(&l);
    for (a, b) in map.s().iter().zip(&expect_s) {
        assert!((a - b).abs() < 1e-15);
    }
    for (a, b) in map.q().iter().zip(&expect_q) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn query_moments_are_standard_normal() {
    let map = DiffMap::new(2, 1, small_cfg(10_000, 1), 17);
    let q = map.q();
    let mean = q.iter().sum::<f64>() / q.len() as f64;
    let var = q.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / q.len() as f64;
    assert!(mean.abs() < 0.05, "mean {mean}");
    assert!((var - 1.0).abs() < 0.05, "variance {var}");
}

#[test]
fn loss_descends_over_inner_iterations() {
    let mut violations = Vec::new();
    for seed in 0..50 {
        let (map, l) = common::fd::instance(100 + seed, 8);
        let mut step = DiffMap::from_parts(
            4,
            l.n_classes,
            map.s().to_vec(),
            map.q().to_vec(),
            small_cfg(8, 1),
        )
        .unwrap();
        let mut prev = step.loss(&l);
        for it in 0..10 {
            step.update_with(&l);
            let now = step.loss(&l);
            if now > prev {
                violations.push((seed, it, now - prev));
            }
            prev = now;
        }
    }
    for v in &violations {
        eprintln!(
            "loss increased: seed {} iteration {} by {:e}",
            v.0, v.1, v.2
        );
    }
    assert!(violations.is_empty(), "{} violations", violations.len());
}

#[test]
fn probabilities_stay_finite_after_many_updates() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 3;
    let mut map = DiffMap::new(4, n, small_cfg(8, 1), 1);
    for _ in 0..100_000 {
        let g = rng.gen_range(0..16);
        let y = (0..n)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    rng.gen_range(0..=1) as f64
                } else {
                    rng.gen()
                }
            })
            .collect();
        map.update_with(&labels(n, vec![(g, true, y)]));
    }
    for i in 0..16 {
        for j in 0..n {
            let p = map.prob(i, j);
            assert!(p > 0.0 && p < 1.0, "p[{i}][{j}] = {p}");
        }
    }
    assert!(map.s().iter().chain(map.q()).all(|v| v.is_finite()));
}

#[test]
fn cell_map_keeps_only_the_last_write() {
    let mut cell = CellMap::new(3, 2).unwrap();
    cell.update(&labels(2, vec![(4, true, vec![1.0, 0.2])]));
    assert_eq!((cell.prob(4, 0), cell.prob(4, 1)), (1.0, 0.0));
    cell.update(&labels(2, vec![(4, true, vec![0.0, 0.5])]));
    assert_eq!((cell.prob(4, 0), cell.prob(4, 1)), (0.0, 1.0));
    assert_eq!(cell.prob(0, 0), 0.5);
}

fn label_strategy() -> impl Strategy<Value = (u64, Vec<(usize, bool, Vec<f64>)>)> {
    (
        any::<u64>(),
        prop::collection::vec(
            (
                0usize..16,
                any::<bool>(),
                prop::collection::vec(0.0f64..=1.0, 3),
            ),
            0..12,
        ),
    )
}

fn dedup(mut grids: Vec<(usize, bool, Vec<f64>)>) -> Vec<(usize, bool, Vec<f64>)> {
    grids.sort_by_key(|g| g.0);
    grids.dedup_by_key(|g| g.0);
    grids
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn invisible_grids_keep_their_embeddings(seed in any::<u64>(), visible in prop::collection::vec(any::<bool>(), 16)) {
        let (mut map, mut l) = common::fd::instance(seed, 8);
        for g in &mut l.grids {
            g.visible = visible[g.index];
        }
        let before = map.clone();
        map.update_with(&l);
        for (i, &seen) in visible.iter().enumerate() {
            if !seen {
                prop_assert_eq!(map.s_row(i), before.s_row(i));
            }
        }
    }

    #[test]
    fn queries_are_pure((seed, grids) in label_strategy()) {
        let mut map = DiffMap::new(4, 3, small_cfg(8, 3), seed);
        map.update_with(&labels(3, dedup(grids)));
        let a = map.query(1).unwrap();
        let b = map.query(1).unwrap();
        prop_assert_eq!(a.p.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.p.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn probabilities_are_in_unit_interval((seed, grids) in label_strategy()) {
        let mut map = DiffMap::new(4, 3, small_cfg(8, 10), seed);
        for _ in 0..5 {
            map.update_with(&labels(3, dedup(grids.clone())));
        }
        for j in 0..3 {
            prop_assert!(map.query(j).unwrap().p.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }
}

/// Under 20% class flips, a full tour leaves the embedding map closer to
/// the true object layout than the cell map on at least 80% of 50 scenes.
#[test]
fn embedding_map_beats_cell_map_under_class_noise() {
    let noise = NoiseModel {
        class_flip: 0.2,
        ..NoiseModel::default()
    };
    let cell = AblationMode {
        differentiable: false,
        ..AblationMode::FULL
    };
    let mut wins = 0;
    for seed in 0..50 {
        let scene = common::room(12, 1000 + seed);
        let diff = common::scripted_tour(
            &scene,
            &AgentSetup {
                noise,
                seed,
                ..AgentSetup::default()
            },
        );
        let base = common::scripted_tour(
            &scene,
            &AgentSetup {
                noise,
                seed,
                mode: cell,
                ..AgentSetup::default()
            },
        );
        let (a, b) = (
            common::class_iou(&diff, &scene),
            common::class_iou(&base, &scene),
        );
        wins += usize::from(a > b);
    }
    assert!(wins >= 40, "embedding map better on {wins}/50 scenes");
}
