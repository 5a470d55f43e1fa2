//! Softmax-regression training of the fine policy.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{BcDataset, Sample, Split};
use crate::control::policy::{argmax, softmax};
use crate::control::{FineAction, PolicyParams, N_FEATURES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.05,
            momentum: 0.9,
            epochs: 30,
            batch: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_rows: usize,
    pub heldout_rows: usize,
    pub train_accuracy: f64,
    /// `None` when the dataset has no held-out rows.
    pub heldout_accuracy: Option<f64>,
    /// Mean training cross-entropy after each epoch.
    pub epoch_loss: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Mean cross-entropy over `samples` and its gradients with respect to the
/// shared weights and the class heads, laid out like [`PolicyParams`].
pub fn loss_and_gradients(params: &PolicyParams, samples: &[&Sample]) -> (f64, Vec<f64>, Vec<f64>) {
    let mut gs = vec![0.0; params.shared.len()];
    let mut gh = vec![0.0; params.heads.len()];
    let loss = accumulate(params, samples, &mut gs, &mut gh);
    (loss, gs, gh)
}

fn accumulate(params: &PolicyParams, samples: &[&Sample], gs: &mut [f64], gh: &mut [f64]) -> f64 {
    let nf = params.n_features;
    let na = FineAction::COUNT;
    let scale = 1.0 / samples.len().max(1) as f64;
    let mut loss = 0.0;
    for s in samples {
        let p = softmax(&params.logits(&s.features, s.class));
        let y = s.action.index();
        loss -= p[y].max(1e-300).ln() * scale;
        let head = (s.class < params.n_classes).then(|| s.class * na * nf);
        for (a, &pa) in p.iter().enumerate() {
            let g = (pa - if a == y { 1.0 } else { 0.0 }) * scale;
            if g == 0.0 {
                continue;
            }
            for &(i, x) in &s.features.entries {
                gs[a * nf + i as usize] += g * x;
                if let Some(h) = head {
                    gh[h + a * nf + i as usize] += g * x;
                }
            }
        }
    }
    loss
}

/// Fraction of samples whose argmax action matches the label.
pub fn accuracy<'a>(params: &PolicyParams, samples: impl IntoIterator<Item = &'a Sample>) -> f64 {
    let (mut hit, mut n) = (0usize, 0usize);
    for s in samples {
        n += 1;
        if argmax(&params.logits(&s.features, s.class)) == s.action.index() {
            hit += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        hit as f64 / n as f64
    }
}

fn mean_loss(params: &PolicyParams, samples: &[&Sample]) -> f64 {
    let mut total = 0.0;
    for s in samples {
        let p = softmax(&params.logits(&s.features, s.class));
        total -= p[s.action.index()].max(1e-300).ln();
    }
    total / samples.len().max(1) as f64
}

/// Momentum SGD touching only the weights with nonzero gradient.
///
/// Weights skipped for `n` steps are caught up on their next touch: the
/// velocity decays by `mu^n` and the weight moves by the geometric sum of
/// the decayed velocities, which is what dense updates would have done.
struct LazyMomentum {
    lr: f64,
    mu: f64,
    v: Vec<f64>,
    last: Vec<u32>,
    t: u32,
}

impl LazyMomentum {
    fn new(n: usize, cfg: &TrainConfig) -> Self {
        LazyMomentum {
            lr: cfg.lr,
            mu: cfg.momentum,
            v: vec![0.0; n],
            last: vec![0; n],
            t: 0,
        }
    }

    fn catch_up(&mut self, w: &mut [f64], k: usize, upto: u32) {
        let n = upto - self.last[k];
        if n > 0 && self.v[k] != 0.0 {
            let decay = self.mu.powi(n as i32);
            let moved = if self.mu == 1.0 {
                n as f64
            } else {
                self.mu * (1.0 - decay) / (1.0 - self.mu)
            };
            w[k] -= self.lr * self.v[k] * moved;
            self.v[k] *= decay;
        }
        self.last[k] = upto;
    }

    /// One step; `touched` lists the indices with nonzero gradient.
    fn step(&mut self, w: &mut [f64], g: &mut [f64], touched: &[usize]) {
        self.t += 1;
        for &k in touched {
            if self.last[k] == self.t {
                continue;
            }
            self.catch_up(w, k, self.t - 1);
            self.v[k] = self.mu * self.v[k] + g[k];
            w[k] -= self.lr * self.v[k];
            g[k] = 0.0;
            self.last[k] = self.t;
        }
    }

    fn flush(&mut self, w: &mut [f64]) {
        for k in 0..w.len() {
            self.catch_up(w, k, self.t);
        }
    }
}

/// Fit the policy on the train split with momentum SGD from zero weights.
pub fn train_bc(
    ds: &BcDataset,
    n_classes: usize,
    cfg: &TrainConfig,
) -> Result<(PolicyParams, TrainReport)> {
    let train: Vec<&Sample> = ds.split(Split::Train).collect();
    if train.is_empty() {
        return Err(Error::DegenerateDataset("train split is empty".into()));
    }
    if let Some(s) = train.iter().find(|s| s.class >= n_classes) {
        return Err(Error::ClassOutOfRange(s.class));
    }
    let mut warnings = Vec::new();
    let first = train[0].action;
    if train.iter().all(|s| s.action == first) {
        warnings.push(format!("every training label is {}", first.name()));
    }
    let mut params = PolicyParams::zeros(n_classes, cfg.seed);
    let nf = params.n_features;
    let na = FineAction::COUNT;
    let mut opt_s = LazyMomentum::new(params.shared.len(), cfg);
    let mut opt_h = LazyMomentum::new(params.heads.len(), cfg);
    let mut gs = vec![0.0; params.shared.len()];
    let mut gh = vec![0.0; params.heads.len()];
    let mut ts: Vec<usize> = Vec::new();
    let mut th: Vec<usize> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let batch = cfg.batch.max(1);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let rows: Vec<&Sample> = chunk.iter().map(|&i| train[i]).collect();
            accumulate(&params, &rows, &mut gs, &mut gh);
            ts.clear();
            th.clear();
            for s in &rows {
                for a in 0..na {
                    for &(i, _) in &s.features.entries {
                        ts.push(a * nf + i as usize);
                        th.push((s.class * na + a) * nf + i as usize);
                    }
                }
            }
            opt_s.step(&mut params.shared, &mut gs, &ts);
            opt_h.step(&mut params.heads, &mut gh, &th);
        }
        opt_s.flush(&mut params.shared);
        opt_h.flush(&mut params.heads);
        epoch_loss.push(mean_loss(&params, &train));
    }
    params.trained = true;
    let heldout: Vec<&Sample> = ds.split(Split::Heldout).collect();
    let report = TrainReport {
        train_rows: train.len(),
        heldout_rows: heldout.len(),
        train_accuracy: accuracy(&params, train.iter().copied()),
        heldout_accuracy: (!heldout.is_empty()).then(|| accuracy(&params, heldout.iter().copied())),
        epoch_loss,
        warnings,
    };
    debug_assert_eq!(params.n_features, N_FEATURES);
    Ok((params, report))
}
