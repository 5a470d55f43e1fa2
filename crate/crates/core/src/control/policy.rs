//! The learned fine-grained policy: a linear softmax classifier over
//! [`FineAction`]s with a shared weight matrix plus one additive head per
//! target class.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{FeatureVector, N_FEATURES};
use crate::error::{Error, Result};
use crate::world::{Action, ClassId};

/// Outputs of the fine policy, in label tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FineAction {
    MoveAhead,
    MoveLeft,
    MoveRight,
    MoveBack,
    RotateLeft,
    RotateRight,
    LookUp,
    LookDown,
    Interact,
}

impl FineAction {
    pub const ALL: [FineAction; 9] = [
        FineAction::MoveAhead,
        FineAction::MoveLeft,
        FineAction::MoveRight,
        FineAction::MoveBack,
        FineAction::RotateLeft,
        FineAction::RotateRight,
        FineAction::LookUp,
        FineAction::LookDown,
        FineAction::Interact,
    ];
    pub const COUNT: usize = 9;

    /// Preference order used to break ties between equally short expert
    /// actions. Turning and looking in place come before translation.
    pub const LABEL_ORDER: [FineAction; 8] = [
        FineAction::RotateRight,
        FineAction::RotateLeft,
        FineAction::LookDown,
        FineAction::LookUp,
        FineAction::MoveAhead,
        FineAction::MoveLeft,
        FineAction::MoveRight,
        FineAction::MoveBack,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<FineAction> {
        Self::ALL.get(i).copied()
    }

    /// The simulator action, or `None` for `Interact`.
    pub fn to_action(self) -> Option<Action> {
        Some(match self {
            FineAction::MoveAhead => Action::MoveAhead,
            FineAction::RotateRight => Action::RotateRight,
            FineAction::RotateLeft => Action::RotateLeft,
            FineAction::LookUp => Action::LookUp,
            FineAction::LookDown => Action::LookDown,
            FineAction::MoveLeft => Action::MoveLeft,
            FineAction::MoveRight => Action::MoveRight,
            FineAction::MoveBack => Action::MoveBack,
            FineAction::Interact => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self.to_action() {
            Some(a) => a.name(),
            None => "Interact",
        }
    }

    pub fn from_name(s: &str) -> Option<FineAction> {
        Self::ALL.iter().copied().find(|a| a.name() == s)
    }
}

pub const POLICY_FORMAT_VERSION: u32 = 1;

/// Weights of the fine policy. `shared` is `[action][feature]`, `heads` is
/// `[class][action][feature]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub version: u32,
    pub n_features: usize,
    pub n_classes: usize,
    pub trained: bool,
    pub seed: u64,
    pub shared: Vec<f64>,
    pub heads: Vec<f64>,
}

impl PolicyParams {
    /// All-zero weights, flagged as untrained.
    pub fn zeros(n_classes: usize, seed: u64) -> Self {
        PolicyParams {
            version: POLICY_FORMAT_VERSION,
            n_features: N_FEATURES,
            n_classes,
            trained: false,
            seed,
            shared: vec![0.0; FineAction::COUNT * N_FEATURES],
            heads: vec![0.0; n_classes * FineAction::COUNT * N_FEATURES],
        }
    }

    fn check(&self) -> Result<()> {
        if !self.trained {
            return Err(Error::UntrainedPolicy);
        }
        let a = FineAction::COUNT;
        if self.version != POLICY_FORMAT_VERSION
            || self.n_features != N_FEATURES
            || self.shared.len() != a * N_FEATURES
            || self.heads.len() != self.n_classes * a * N_FEATURES
        {
            return Err(Error::Parse(format!(
                "policy shape mismatch: version {} with {} features",
                self.version, self.n_features
            )));
        }
        Ok(())
    }

    /// Unnormalized action scores.
    pub fn logits(&self, x: &FeatureVector, class: ClassId) -> [f64; FineAction::COUNT] {
        let nf = self.n_features;
        let mut out = [0.0; FineAction::COUNT];
        let head = (class < self.n_classes).then(|| class * FineAction::COUNT * nf);
        for (a, o) in out.iter_mut().enumerate() {
            let w = &self.shared[a * nf..(a + 1) * nf];
            let mut s = 0.0;
            for &(i, v) in &x.entries {
                s += w[i as usize] * v;
            }
            if let Some(h) = head {
                let hw = &self.heads[h + a * nf..h + (a + 1) * nf];
                for &(i, v) in &x.entries {
                    s += hw[i as usize] * v;
                }
            }
            *o = s;
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let p: PolicyParams = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        p.check()?;
        Ok(p)
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Highest-scoring action, lowest index on ties.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &z) in logits.iter().enumerate() {
        if z > logits[best] {
            best = i;
        }
    }
    best
}

/// Pick the fine action for the current features.
pub fn fine_policy(
    features: &FeatureVector,
    class: ClassId,
    params: &PolicyParams,
) -> Result<FineAction> {
    params.check()?;
    Ok(FineAction::ALL[argmax(&params.logits(features, class))])
}

/// All actions from most to least preferred, lower index first on ties.
pub fn ranked_actions(
    features: &FeatureVector,
    class: ClassId,
    params: &PolicyParams,
) -> Result<[FineAction; FineAction::COUNT]> {
    params.check()?;
    let z = params.logits(features, class);
    let mut order = FineAction::ALL;
    order.sort_by(|a, b| {
        z[b.index()]
            .total_cmp(&z[a.index()])
            .then(a.index().cmp(&b.index()))
    });
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untrained_params_are_refused() {
        let p = PolicyParams::zeros(3, 0);
        let x = FeatureVector {
            entries: vec![(0, 1.0)],
        };
        assert!(matches!(
            fine_policy(&x, 0, &p),
            Err(Error::UntrainedPolicy)
        ));
    }

    #[test]
    fn head_adds_to_shared() {
        let mut p = PolicyParams::zeros(2, 0);
        p.trained = true;
        p.shared[FineAction::LookDown.index() * N_FEATURES] = 1.0;
        let h = FineAction::COUNT * N_FEATURES + FineAction::Interact.index() * N_FEATURES;
        p.heads[h] = 2.0;
        let x = FeatureVector {
            entries: vec![(0, 1.0)],
        };
        assert_eq!(fine_policy(&x, 0, &p).unwrap(), FineAction::LookDown);
        assert_eq!(fine_policy(&x, 1, &p).unwrap(), FineAction::Interact);
    }

    #[test]
    fn ranking_starts_with_the_argmax() {
        let mut p = PolicyParams::zeros(1, 0);
        p.trained = true;
        p.shared[FineAction::LookUp.index() * N_FEATURES] = 2.0;
        p.shared[FineAction::MoveBack.index() * N_FEATURES] = 1.0;
        let x = FeatureVector {
            entries: vec![(0, 1.0)],
        };
        let r = ranked_actions(&x, 0, &p).unwrap();
        assert_eq!(r[0], fine_policy(&x, 0, &p).unwrap());
        assert_eq!(
            &r[..3],
            &[
                FineAction::LookUp,
                FineAction::MoveBack,
                FineAction::MoveAhead
            ]
        );
    }

    #[test]
    fn names_round_trip() {
        for a in FineAction::ALL {
            assert_eq!(FineAction::from_name(a.name()), Some(a));
            assert_eq!(FineAction::from_index(a.index()), Some(a));
        }
        let s = softmax(&[1.0, 1.0]);
        assert!((s[0] - 0.5).abs() < 1e-15);
    }
}
