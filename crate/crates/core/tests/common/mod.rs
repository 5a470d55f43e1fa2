//! Helpers shared by the integration tests.

#![allow(dead_code)]

use std::sync::Arc;

use diffscene::control::{bfs_plan, Agent, AgentSetup, NavMap};
use diffscene::world::{
    flood_fill, generate_scene, Action, Catalog, GridScene, RenderConfig, SceneGenConfig, World,
};

pub fn catalog() -> Arc<Catalog> {
    Arc::new(Catalog::default())
}

/// A seeded square room of `side` cells.
pub fn room(side: i32, seed: u64) -> GridScene {
    let cfg = SceneGenConfig {
        width: side,
        height: side,
        internal_walls: 1,
        small_objects: 6,
        ..SceneGenConfig::default()
    };
    generate_scene(&cfg, catalog(), seed).expect("room generates")
}

/// Walk the agent through every reachable cell in boustrophedon order,
/// turning a full circle at each one. Paths come from the true floor plan,
/// so the tour never collides.
pub fn scripted_tour(scene: &GridScene, setup: &AgentSetup) -> Agent<'static> {
    assert_eq!(scene.width, scene.height);
    let m = scene.width as usize;
    let nav = NavMap::new(m, scene.navigability());
    let reach = flood_fill(scene, scene.agent_start.cell());
    let mut order = Vec::new();
    for z in 0..scene.height {
        let xs: Vec<i32> = if z % 2 == 0 {
            (0..scene.width).collect()
        } else {
            (0..scene.width).rev().collect()
        };
        for x in xs {
            if reach[(z * scene.width + x) as usize] {
                order.push(z as usize * m + x as usize);
            }
        }
    }
    let world = World::new(scene.clone(), RenderConfig::default());
    let mut agent = Agent::new(world, setup, None).expect("agent builds");
    for goal in order {
        let (x, z) = agent.world.agent.cell();
        let here = z as usize * m + x as usize;
        let plan = bfs_plan(&nav, here, agent.world.agent.yaw, &[goal]).expect("reachable cell");
        for a in plan {
            assert!(agent.execute(a).success, "tour step {} failed", a.name());
        }
        for _ in 0..4 {
            agent.execute(Action::RotateRight);
        }
    }
    agent
}

/// Object classes truly present at each map grid: anything whose
/// containers are all open, placed at the grid's cell.
pub fn truth_at(scene: &GridScene, start: (i32, i32), offset: (i32, i32)) -> Vec<usize> {
    let cell = (start.0 + offset.0, start.1 + offset.1);
    let mut out: Vec<usize> = scene
        .objects
        .iter()
        .filter(|o| scene.root_cell(o.id) == Some(cell) && scene.is_reachable_content(o.id))
        .map(|o| o.class_id)
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Mean over object classes of the IoU between `p > 0.5` (the more likely
/// of present and absent) and the true class cells, over the grids the
/// map received evidence for. Classes absent from both sides are skipped.
pub fn class_iou(agent: &Agent, scene: &GridScene) -> f64 {
    let n = scene.catalog.len();
    let start = scene.agent_start.cell();
    let mut inter = vec![0usize; n];
    let mut union = vec![0usize; n];
    for &g in agent.memory.touched() {
        let truth = truth_at(scene, start, agent.map.offset_of(g));
        for j in 0..n {
            let t = truth.contains(&j);
            let p = agent.memory.prob(g, j) > 0.5;
            inter[j] += usize::from(t && p);
            union[j] += usize::from(t || p);
        }
    }
    let ious: Vec<f64> = (0..n)
        .filter(|&j| union[j] > 0)
        .map(|j| inter[j] as f64 / union[j] as f64)
        .collect();
    ious.iter().sum::<f64>() / ious.len().max(1) as f64
}

pub mod fd {
    //! Central finite differences of the linear map loss, computed from
    //! first principles so they share no code with the crate.

    use diffscene::mapping::{LabeledGrid, SoftLabels};
    use diffscene::scene_repr::{DiffMap, ReprConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    pub const EPS: f64 = 1e-5;

    fn sig(z: f64) -> f64 {
        1.0 / (1.0 + (-z).exp())
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// A random 4x4 map with `c`-dimensional embeddings, some visible
    /// grids and labels in [0, 1].
    pub fn instance(seed: u64, c: usize) -> (DiffMap, SoftLabels) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, n) = (4, rng.gen_range(2..=6));
        let normal = Normal::new(0.0, 0.5).unwrap();
        let s: Vec<f64> = (0..m * m * c).map(|_| normal.sample(&mut rng)).collect();
        let q: Vec<f64> = (0..n * c).map(|_| normal.sample(&mut rng)).collect();
        let cfg = ReprConfig {
            c,
            ..ReprConfig::default()
        };
        let map = DiffMap::from_parts(m, n, s, q, cfg).unwrap();
        let grids = (0..m * m)
            .map(|index| LabeledGrid {
                index,
                c: 10,
                visible: rng.gen_bool(0.7),
                y: (0..n)
                    .map(|_| {
                        if rng.gen_bool(0.3) {
                            rng.gen_range(0..=1) as f64
                        } else {
                            rng.gen()
                        }
                    })
                    .collect(),
            })
            .collect();
        (
            map,
            SoftLabels {
                rho: 0,
                n_classes: n,
                grids,
            },
        )
    }

    /// Change in the summed loss when `z` moves to `z_plus` and `z_minus`,
    /// for one (grid, class) entry with label `y`.
    fn entry_delta(z_plus: f64, z_minus: f64, y: f64) -> f64 {
        // L = -(1 - y)(1 - f) - y f = (1 - 2y) f + const
        (1.0 - 2.0 * y) * (sig(z_plus) - sig(z_minus))
    }

    /// Maximum relative error between the crate's analytic gradients and
    /// central differences, over every entry of S and Q. Only the loss
    /// terms that depend on the perturbed parameter are differenced.
    pub fn max_relative_error(map: &DiffMap, labels: &SoftLabels) -> f64 {
        let (gs, gq) = map.gradients(labels);
        let c = map.config().c;
        let n = labels.n_classes;
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
        let mut worst = 0.0f64;
        let m2 = map.s().len() / c;
        for i in 0..m2 {
            let vis = labels.grids.iter().find(|g| g.index == i && g.visible);
            for k in 0..c {
                let numeric = match vis {
                    None => 0.0,
                    Some(g) => {
                        let mut plus = map.s_row(i).to_vec();
                        let mut minus = plus.clone();
                        plus[k] += EPS;
                        minus[k] -= EPS;
                        (0..n)
                            .map(|j| {
                                entry_delta(
                                    dot(&plus, map.q_row(j)),
                                    dot(&minus, map.q_row(j)),
                                    g.y[j],
                                )
                            })
                            .sum::<f64>()
                            / (2.0 * EPS)
                    }
                };
                worst = worst.max(rel(gs[i * c + k], numeric));
            }
        }
        for j in 0..n {
            for k in 0..c {
                let mut plus = map.q_row(j).to_vec();
                let mut minus = plus.clone();
                plus[k] += EPS;
                minus[k] -= EPS;
                let numeric = labels
                    .grids
                    .iter()
                    .filter(|g| g.visible)
                    .map(|g| {
                        entry_delta(
                            dot(map.s_row(g.index), &plus),
                            dot(map.s_row(g.index), &minus),
                            g.y[j],
                        )
                    })
                    .sum::<f64>()
                    / (2.0 * EPS);
                worst = worst.max(rel(gq[j * c + k], numeric));
            }
        }
        worst
    }
}

pub mod ucs {
    //! Uniform-cost search over (grid, heading) states with a binary heap,
    //! used as an oracle for the breadth-first planner.

    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    use diffscene::control::NavMap;
    use diffscene::world::{Action, Yaw};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Headings as quarter turns clockwise from +z.
    const STEP: [(i64, i64); 4] = [(0, 1), (1, 0), (0, -1), (-1, 0)];

    fn forward(nav: &NavMap, g: usize, h: usize) -> Option<usize> {
        let m = nav.m as i64;
        let (x, z) = ((g as i64) % m + STEP[h].0, (g as i64) / m + STEP[h].1);
        let inside = x >= 0 && z >= 0 && x < m && z < m;
        (inside && nav.navigable[(z * m + x) as usize]).then(|| (z * m + x) as usize)
    }

    fn quarter(yaw: Yaw) -> usize {
        (yaw.degrees().rem_euclid(360) / 90) as usize
    }

    /// Cheapest number of unit actions to stand on any goal grid.
    pub fn cost(nav: &NavMap, start: usize, yaw: Yaw, goals: &[usize]) -> Option<usize> {
        let mut best = vec![usize::MAX; nav.m * nav.m * 4];
        let mut heap = BinaryHeap::new();
        let s = (start, quarter(yaw));
        best[s.0 * 4 + s.1] = 0;
        heap.push(Reverse((0usize, s.0, s.1)));
        while let Some(Reverse((d, g, h))) = heap.pop() {
            if d > best[g * 4 + h] {
                continue;
            }
            if goals.contains(&g) {
                return Some(d);
            }
            let mut next = vec![(g, (h + 1) % 4), (g, (h + 3) % 4)];
            if let Some(f) = forward(nav, g, h) {
                next.push((f, h));
            }
            for (ng, nh) in next {
                if d + 1 < best[ng * 4 + nh] {
                    best[ng * 4 + nh] = d + 1;
                    heap.push(Reverse((d + 1, ng, nh)));
                }
            }
        }
        None
    }

    /// Execute a plan on the map; `None` if a move leaves the free space.
    pub fn replay(nav: &NavMap, start: usize, yaw: Yaw, plan: &[Action]) -> Option<usize> {
        let (mut g, mut h) = (start, quarter(yaw));
        for a in plan {
            match a {
                Action::MoveAhead => g = forward(nav, g, h)?,
                Action::RotateRight => h = (h + 1) % 4,
                Action::RotateLeft => h = (h + 3) % 4,
                _ => return None,
            }
        }
        Some(g)
    }

    /// A random `m` x `m` map with about 30% blocked grids, a free start
    /// and one to four goals.
    pub fn random_case(seed: u64, m: usize) -> (NavMap, usize, Yaw, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut navigable: Vec<bool> = (0..m * m).map(|_| rng.gen_bool(0.7)).collect();
        let start = rng.gen_range(0..m * m);
        navigable[start] = true;
        let goals = (0..rng.gen_range(1..=4))
            .map(|_| rng.gen_range(0..m * m))
            .collect();
        (
            NavMap::new(m, navigable),
            start,
            Yaw::from_degrees(90 * rng.gen_range(0..4)),
            goals,
        )
    }
}

/// The default policy: 50 expert-labelled scenes, default training. Each
/// test binary trains it at most once.
pub fn default_policy() -> &'static diffscene::control::PolicyParams {
    use diffscene::imitation::{collect_dataset, train_bc, DatasetConfig, TrainConfig};
    static POLICY: std::sync::OnceLock<diffscene::control::PolicyParams> =
        std::sync::OnceLock::new();
    POLICY.get_or_init(|| {
        let seeds: Vec<u64> = (0..50).collect();
        let ds = collect_dataset(&seeds, catalog(), &DatasetConfig::default()).expect("dataset");
        train_bc(&ds, catalog().len(), &TrainConfig::default())
            .expect("training")
            .0
    })
}
