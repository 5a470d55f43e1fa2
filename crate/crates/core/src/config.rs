//! Run configuration shared by the command-line tools.
//!
//! Values are layered: built-in defaults, then an optional JSON file, then
//! `key.path=value` overrides and dedicated flags from the command line.
//! The resolved configuration is echoed into every report and metrics
//! file so a result can always be traced back to its settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bench::{BenchConfig, SuiteConfig};
use crate::control::{AgentSetup, ControlConfig};
use crate::error::{Error, Result};
use crate::imitation::{DatasetConfig, TrainConfig};
use crate::mapping::MapConfig;
use crate::scene_repr::ReprConfig;
use crate::world::{NoiseModel, RenderConfig, SceneGenConfig};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub scenes: Option<PathBuf>,
    pub tasks: Option<PathBuf>,
    pub policy: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Expert dataset settings; scene and render settings come from the
/// top-level sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSettings {
    /// Label states up to this many fine actions from an interaction.
    pub radius: usize,
    pub max_per_object: usize,
    pub heldout_every: usize,
}

impl Default for DatasetSettings {
    fn default() -> Self {
        let d = DatasetConfig::default();
        DatasetSettings {
            radius: d.radius,
            max_per_object: d.max_per_object,
            heldout_every: d.heldout_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSettings {
            lr: t.lr,
            momentum: t.momentum,
            epochs: t.epochs,
            batch: t.batch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSettings {
    /// Primitive steps per episode, warm-up included.
    pub budget: usize,
    pub scene_retries: usize,
    /// Episodes drawn by `gen-tasks`.
    pub episodes: usize,
    pub slice_fraction: f64,
}

impl Default for BenchSettings {
    fn default() -> Self {
        let b = BenchConfig::default();
        let s = SuiteConfig::default();
        BenchSettings {
            budget: b.budget,
            scene_retries: b.scene_retries,
            episodes: s.episodes,
            slice_fraction: s.slice_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed. Scene, dataset, training and episode seeds derive
    /// from it.
    pub seed: u64,
    /// Worker thread cap. Results do not depend on it, so it is left out
    /// of the echoed configuration.
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
    /// Ablation mode name, `expert` to replay expert actions, or `all`.
    pub ablation: String,
    pub paths: Paths,
    pub scene: SceneGenConfig,
    pub render: RenderConfig,
    pub noise: NoiseModel,
    pub map: MapConfig,
    pub repr: ReprConfig,
    pub control: ControlConfig,
    pub dataset: DatasetSettings,
    pub train: TrainSettings,
    pub bench: BenchSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            threads: None,
            ablation: "full".into(),
            paths: Paths::default(),
            scene: SceneGenConfig::default(),
            render: RenderConfig::default(),
            noise: NoiseModel::default(),
            map: MapConfig::default(),
            repr: ReprConfig::default(),
            control: ControlConfig::default(),
            dataset: DatasetSettings::default(),
            train: TrainSettings::default(),
            bench: BenchSettings::default(),
        }
    }
}

/// Recursively overlay `top` onto `base`. Objects merge key by key; any
/// other value replaces.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Set `key` (dot separated) in `root` to `raw`, parsed as JSON when
/// possible and taken as a string otherwise.
fn set_path(root: &mut Value, key: &str, raw: &str) -> Result<()> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("{key}: {part} is not a section")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Err(Error::Config("empty override key".into()))
}

/// Split `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.to_string())),
        _ => Err(Error::Config(format!("override {s:?} is not key=value"))),
    }
}

impl RunConfig {
    /// Defaults, overlaid with `file` and then with `overrides`.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut value = serde_json::to_value(RunConfig::default())?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)?;
            let layer: Value = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            if !layer.is_object() {
                return Err(Error::Config(format!(
                    "{}: expected a JSON object",
                    path.display()
                )));
            }
            merge(&mut value, layer);
        }
        for (k, v) in overrides {
            set_path(&mut value, k, v)?;
        }
        let cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.map.m < 8 {
            return bad(format!("map.m must be at least 8, got {}", self.map.m));
        }
        if self.repr.c == 0 || self.repr.iters == 0 {
            return bad("repr.c and repr.iters must be positive".into());
        }
        if !(self.repr.alpha.is_finite() && self.repr.alpha > 0.0) {
            return bad(format!(
                "repr.alpha must be positive, got {}",
                self.repr.alpha
            ));
        }
        for (name, p) in [
            ("noise.class_flip", self.noise.class_flip),
            ("bench.slice_fraction", self.bench.slice_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.noise.depth_jitter < 0.0 {
            return bad("noise.depth_jitter must be non-negative".into());
        }
        if self.scene.width < 5 || self.scene.height < 5 {
            return bad("scene must be at least 5x5 cells".into());
        }
        if self.render.rays == 0 || self.render.fov_deg <= 0.0 || self.render.max_range <= 0.0 {
            return bad("render.rays, render.fov_deg and render.max_range must be positive".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        Ok(())
    }

    /// The configuration as written into reports.
    pub fn echo(&self) -> Value {
        serde_json::to_value(self).expect("run config serializes")
    }

    pub fn agent_setup(&self) -> AgentSetup {
        AgentSetup {
            map: self.map,
            repr: self.repr,
            control: self.control.clone(),
            noise: self.noise,
            seed: self.seed,
            ..AgentSetup::default()
        }
    }

    pub fn bench_config(&self) -> BenchConfig {
        BenchConfig {
            scene: self.scene.clone(),
            render: self.render.clone(),
            agent: self.agent_setup(),
            budget: self.bench.budget,
            scene_retries: self.bench.scene_retries,
        }
    }

    pub fn suite_config(&self) -> SuiteConfig {
        SuiteConfig {
            episodes: self.bench.episodes,
            seed: self.seed,
            slice_fraction: self.bench.slice_fraction,
        }
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            scene: self.scene.clone(),
            render: self.render.clone(),
            radius: self.dataset.radius,
            max_per_object: self.dataset.max_per_object,
            heldout_every: self.dataset.heldout_every,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.train.lr,
            momentum: self.train.momentum,
            epochs: self.train.epochs,
            batch: self.train.batch,
            seed: self.seed,
        }
    }
}
