use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ProbMap, SceneMemory};
use crate::error::{Error, Result};
use crate::mapping::SoftLabels;

/// Per-entry training loss of the embedding map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// `L = -(1-y)(1-f) - y f`, linear in the prediction.
    #[default]
    Linear,
    /// Binary cross-entropy on the logit.
    CrossEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReprConfig {
    /// Embedding dimension.
    pub c: usize,
    pub alpha: f64,
    pub iters: usize,
    pub loss: LossKind,
    /// Keep query vectors across episodes instead of redrawing them.
    pub persist_queries: bool,
}

impl Default for ReprConfig {
    fn default() -> Self {
        ReprConfig {
            c: 256,
            alpha: 0.01,
            iters: 10,
            loss: LossKind::Linear,
            persist_queries: false,
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * k + l] * b[4 * k + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in chunks * 4..a.len() {
        s += a[k] * b[k];
    }
    s
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Grid embeddings `S` (M² x C) and class queries `Q` (N x C) with
/// `p_ij = sigmoid(s_i . q_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffMap {
    m: usize,
    c: usize,
    n: usize,
    s: Vec<f64>,
    q: Vec<f64>,
    cfg: ReprConfig,
    touched: Vec<usize>,
    is_touched: Vec<bool>,
}

impl DiffMap {
    /// Zero embeddings and standard-normal queries drawn from `seed`.
    pub fn new(m: usize, n_classes: usize, cfg: ReprConfig, seed: u64) -> Self {
        let c = cfg.c;
        DiffMap {
            m,
            c,
            n: n_classes,
            s: vec![0.0; m * m * c],
            q: draw_queries(n_classes, c, seed),
            cfg,
            touched: Vec::new(),
            is_touched: vec![false; m * m],
        }
    }

    /// Build from explicit matrices, row-major.
    pub fn from_parts(
        m: usize,
        n_classes: usize,
        s: Vec<f64>,
        q: Vec<f64>,
        cfg: ReprConfig,
    ) -> Result<Self> {
        let c = cfg.c;
        if s.len() != m * m * c || q.len() != n_classes * c {
            return Err(Error::Config(
                "embedding shapes do not match M, C and class count".into(),
            ));
        }
        let is_touched: Vec<bool> = (0..m * m)
            .map(|i| s[i * c..(i + 1) * c].iter().any(|&v| v != 0.0))
            .collect();
        let touched = (0..m * m).filter(|&i| is_touched[i]).collect();
        Ok(DiffMap {
            m,
            c,
            n: n_classes,
            s,
            q,
            cfg,
            touched,
            is_touched,
        })
    }

    /// Zero the embeddings and, unless queries persist, redraw them.
    pub fn reset(&mut self, seed: u64) {
        self.s.iter_mut().for_each(|v| *v = 0.0);
        if !self.cfg.persist_queries {
            self.q = draw_queries(self.n, self.c, seed);
        }
        self.touched.clear();
        self.is_touched.iter_mut().for_each(|t| *t = false);
    }

    pub fn config(&self) -> &ReprConfig {
        &self.cfg
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn s_row(&self, i: usize) -> &[f64] {
        &self.s[i * self.c..(i + 1) * self.c]
    }

    pub fn q_row(&self, j: usize) -> &[f64] {
        &self.q[j * self.c..(j + 1) * self.c]
    }

    pub fn logit(&self, i: usize, j: usize) -> f64 {
        dot(self.s_row(i), self.q_row(j))
    }

    /// Coefficient `dL/dz` of one entry, or `None` when it is exactly zero.
    fn coefficient(&self, z: f64, y: f64) -> Option<f64> {
        match self.cfg.loss {
            LossKind::Linear => {
                let a = 1.0 - 2.0 * y;
                if a == 0.0 {
                    return None;
                }
                let f = sigmoid(z);
                Some(a * f * (1.0 - f))
            }
            LossKind::CrossEntropy => {
                let g = sigmoid(z) - y;
                (g != 0.0).then_some(g)
            }
        }
    }

    fn entry_loss(&self, z: f64, y: f64) -> f64 {
        match self.cfg.loss {
            LossKind::Linear => {
                let f = sigmoid(z);
                -(1.0 - y) * (1.0 - f) - y * f
            }
            LossKind::CrossEntropy => {
                // log(1 + e^z) - y z, computed without overflow
                let softplus = if z > 0.0 {
                    z + (-z).exp().ln_1p()
                } else {
                    z.exp().ln_1p()
                };
                softplus - y * z
            }
        }
    }

    /// Summed loss over visible grids and all classes.
    pub fn loss(&self, labels: &SoftLabels) -> f64 {
        labels
            .visible()
            .map(|g| {
                (0..self.n)
                    .map(|j| self.entry_loss(self.logit(g.index, j), g.y[j]))
                    .sum::<f64>()
            })
            .sum()
    }

    /// Analytic gradients `(dL/dS, dL/dQ)` with the shapes of `S` and `Q`.
    pub fn gradients(&self, labels: &SoftLabels) -> (Vec<f64>, Vec<f64>) {
        let mut gs = vec![0.0; self.s.len()];
        let mut gq = vec![0.0; self.q.len()];
        let c = self.c;
        for g in labels.visible() {
            let i = g.index;
            for j in 0..self.n {
                if let Some(k) = self.coefficient(self.logit(i, j), g.y[j]) {
                    axpy(&mut gs[i * c..(i + 1) * c], k, self.q_row(j));
                    axpy(&mut gq[j * c..(j + 1) * c], k, self.s_row(i));
                }
            }
        }
        (gs, gq)
    }

    /// Run the configured number of simultaneous gradient steps.
    pub fn update_with(&mut self, labels: &SoftLabels) {
        let visible: Vec<(usize, &[f64])> = labels
            .visible()
            .map(|g| (g.index, g.y.as_slice()))
            .collect();
        if visible.is_empty() {
            return;
        }
        let c = self.c;
        let alpha = self.cfg.alpha;
        let mut gs = vec![0.0; visible.len() * c];
        let mut gq = vec![0.0; self.n * c];
        let mut row_hit = vec![false; visible.len()];
        let mut class_hit = vec![false; self.n];
        for _ in 0..self.cfg.iters {
            gs.iter_mut().for_each(|v| *v = 0.0);
            gq.iter_mut().for_each(|v| *v = 0.0);
            row_hit.iter_mut().for_each(|v| *v = false);
            class_hit.iter_mut().for_each(|v| *v = false);
            for (k, &(i, y)) in visible.iter().enumerate() {
                let s_i = &self.s[i * c..(i + 1) * c];
                for j in 0..self.n {
                    let q_j = &self.q[j * c..(j + 1) * c];
                    if let Some(coef) = self.coefficient(dot(s_i, q_j), y[j]) {
                        axpy(&mut gs[k * c..(k + 1) * c], coef, q_j);
                        axpy(&mut gq[j * c..(j + 1) * c], coef, s_i);
                        row_hit[k] = true;
                        class_hit[j] = true;
                    }
                }
            }
            for (k, &(i, _)) in visible.iter().enumerate() {
                if !row_hit[k] {
                    continue;
                }
                axpy(
                    &mut self.s[i * c..(i + 1) * c],
                    -alpha,
                    &gs[k * c..(k + 1) * c],
                );
                if !self.is_touched[i] {
                    self.is_touched[i] = true;
                    self.touched.push(i);
                }
            }
            for j in 0..self.n {
                if class_hit[j] {
                    axpy(
                        &mut self.q[j * c..(j + 1) * c],
                        -alpha,
                        &gq[j * c..(j + 1) * c],
                    );
                }
            }
        }
    }
}

fn draw_queries(n: usize, c: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * c)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect()
}

impl SceneMemory for DiffMap {
    fn m(&self) -> usize {
        self.m
    }

    fn n_classes(&self) -> usize {
        self.n
    }

    fn update(&mut self, labels: &SoftLabels) {
        self.update_with(labels);
    }

    fn prob(&self, i: usize, j: usize) -> f64 {
        if self.is_touched[i] {
            sigmoid(self.logit(i, j))
        } else {
            0.5
        }
    }

    fn query(&self, j: usize) -> Result<ProbMap> {
        if j >= self.n {
            return Err(Error::ClassOutOfRange(j));
        }
        let mut map = ProbMap::uniform(self.m, 0.5);
        for &i in &self.touched {
            map.p[i] = sigmoid(self.logit(i, j));
        }
        Ok(map)
    }

    fn touched(&self) -> &[usize] {
        &self.touched
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{LabeledGrid, SoftLabels};

    fn one_grid(index: usize, y: Vec<f64>) -> SoftLabels {
        SoftLabels {
            rho: 0,
            n_classes: y.len(),
            grids: vec![LabeledGrid {
                index,
                c: 1,
                visible: true,
                y,
            }],
        }
    }

    #[test]
    fn fresh_map_is_uncertain_everywhere() {
        let map = DiffMap::new(
            4,
            3,
            ReprConfig {
                c: 8,
                ..Default::default()
            },
            1,
        );
        for j in 0..3 {
            assert!(map.query(j).unwrap().p.iter().all(|&p| p == 0.5));
        }
        assert!(matches!(map.query(3), Err(Error::ClassOutOfRange(3))));
    }

    #[test]
    fn sigmoid_of_log_three_is_three_quarters() {
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn one_dimensional_hand_step() {
        let cfg = ReprConfig {
            c: 1,
            alpha: 0.01,
            iters: 1,
            ..Default::default()
        };
        let mut map = DiffMap::from_parts(1, 1, vec![0.0], vec![1.0], cfg).unwrap();
        map.update(&one_grid(0, vec![1.0]));
        assert!((map.s()[0] - 0.0025).abs() < 1e-15);
        assert_eq!(map.q()[0], 1.0);
    }

    #[test]
    fn same_seed_same_queries() {
        let cfg = ReprConfig {
            c: 16,
            ..Default::default()
        };
        assert_eq!(
            DiffMap::new(2, 5, cfg, 7).q(),
            DiffMap::new(2, 5, cfg, 7).q()
        );
        assert_ne!(
            DiffMap::new(2, 5, cfg, 7).q(),
            DiffMap::new(2, 5, cfg, 8).q()
        );
    }

    #[test]
    fn repeated_positive_labels_converge() {
        let cfg = ReprConfig {
            c: 16,
            ..Default::default()
        };
        let mut map = DiffMap::new(2, 2, cfg, 3);
        let labels = one_grid(1, vec![1.0, 0.0]);
        for _ in 0..50 {
            map.update(&labels);
        }
        assert!(map.prob(1, 0) > 0.9);
        assert!(map.prob(1, 1) < 0.1);
        assert_eq!(map.prob(0, 0), 0.5);
    }

    #[test]
    fn reset_clears_embeddings() {
        let cfg = ReprConfig {
            c: 4,
            ..Default::default()
        };
        let mut map = DiffMap::new(2, 2, cfg, 3);
        map.update(&one_grid(0, vec![1.0, 0.0]));
        assert!(!map.touched().is_empty());
        map.reset(3);
        assert_eq!(map, DiffMap::new(2, 2, cfg, 3));
    }
}
