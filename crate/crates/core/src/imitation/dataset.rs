//! Behavior-cloning datasets: expert labels turned into feature rows.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::expert::{default_verb, expert_label_short_horizon};
use crate::control::{
    fine_features, relative_offset, FeatureVector, FineAction, FineTarget, Surroundings,
};
use crate::error::{Error, Result};
use crate::mapping::PoseEstimate;
use crate::world::{
    generate_scene, render_egocentric, AgentState, Catalog, ClassId, GridScene, ObjectId,
    RenderConfig, SceneGenConfig, Yaw, CELL_SIZE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Heldout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub scene: SceneGenConfig,
    pub render: RenderConfig,
    /// Label states up to this many fine actions from an interaction.
    pub radius: usize,
    /// Rows kept per object, drawn without replacement. 0 keeps all.
    pub max_per_object: usize,
    /// Every n-th scene (by position in the seed list) is held out.
    pub heldout_every: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            scene: SceneGenConfig::default(),
            render: RenderConfig::default(),
            radius: 4,
            max_per_object: 96,
            heldout_every: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub scene: u64,
    pub state: AgentState,
    pub object: ObjectId,
    pub class: ClassId,
    pub action: FineAction,
    pub steps: usize,
    pub split: Split,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BcDataset {
    pub samples: Vec<Sample>,
    /// Objects with no interactable pose, skipped.
    pub skipped: usize,
}

impl BcDataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Sample> + '_ {
        self.samples.iter().filter(move |s| s.split == split)
    }
}

/// Pose estimate in the scene's own cell frame, for offline featurizing.
pub fn world_pose(a: &AgentState) -> PoseEstimate {
    PoseEstimate {
        x: a.x as f64 * CELL_SIZE,
        z: a.z as f64 * CELL_SIZE,
        yaw: a.yaw.degrees(),
        horizon: a.horizon,
    }
}

/// Features of a labelled pose using the oracle frame.
pub fn features_at(
    scene: &GridScene,
    agent: &AgentState,
    id: ObjectId,
    cfg: &RenderConfig,
) -> Option<FeatureVector> {
    let cell = scene.root_cell(id)?;
    let frame = render_egocentric(scene, agent, cfg);
    let pose = world_pose(agent);
    let (fx, fz) = agent.yaw.delta();
    let (rx, rz) = agent.yaw.right().delta();
    let fr = relative_offset(&pose, cell);
    let surroundings = Surroundings::from_fn(fr, |f, r| {
        !scene.is_navigable(agent.x + f * fx + r * rx, agent.z + f * fz + r * rz)
    });
    let root = scene.root_object(id);
    let top = scene.catalog.get(scene.class_of(root)).height.1;
    let target = FineTarget {
        cell,
        class: scene.class_of(id),
        top,
    };
    Some(fine_features(&frame, &pose, &target, &surroundings))
}

/// Rows for one scene, objects in id order.
pub fn scene_samples(
    scene: &GridScene,
    scene_seed: u64,
    split: Split,
    cfg: &DatasetConfig,
) -> (Vec<Sample>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ scene_seed.rotate_left(32));
    let mut out = Vec::new();
    let mut skipped = 0;
    for obj in &scene.objects {
        let Some(verb) = default_verb(scene, obj.id) else {
            continue;
        };
        let Ok(mut labels) =
            expert_label_short_horizon(scene, obj.id, &verb, cfg.radius, &cfg.render)
        else {
            skipped += 1;
            continue;
        };
        if cfg.max_per_object > 0 && labels.len() > cfg.max_per_object {
            labels.shuffle(&mut rng);
            labels.truncate(cfg.max_per_object);
        }
        for l in labels {
            let Some(features) = features_at(scene, &l.state, obj.id, &cfg.render) else {
                continue;
            };
            out.push(Sample {
                scene: scene_seed,
                state: l.state,
                object: obj.id,
                class: obj.class_id,
                action: l.action,
                steps: l.steps_to_interaction,
                split,
                features,
            });
        }
    }
    (out, skipped)
}

/// Generate one scene per seed and label every object in it. Scenes are
/// processed in parallel; the result is ordered by seed position.
pub fn collect_dataset(
    seeds: &[u64],
    catalog: Arc<Catalog>,
    cfg: &DatasetConfig,
) -> Result<BcDataset> {
    let scenes = seeds
        .par_iter()
        .map(|&seed| generate_scene(&cfg.scene, catalog.clone(), seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(collect_from_scenes(&scenes, cfg))
}

/// Label already generated scenes, e.g. loaded from disk. Every
/// `heldout_every`-th scene by position goes to the held-out split.
pub fn collect_from_scenes(scenes: &[GridScene], cfg: &DatasetConfig) -> BcDataset {
    let every = cfg.heldout_every;
    let parts: Vec<(Vec<Sample>, usize)> = scenes
        .par_iter()
        .enumerate()
        .map(|(i, scene)| {
            let split = if every > 0 && i % every == every - 1 {
                Split::Heldout
            } else {
                Split::Train
            };
            scene_samples(scene, scene.rng_seed, split, cfg)
        })
        .collect();
    let mut ds = BcDataset::default();
    for (s, k) in parts {
        ds.samples.extend(s);
        ds.skipped += k;
    }
    ds
}

#[derive(Serialize, Deserialize)]
struct Row {
    scene: u64,
    x: i32,
    z: i32,
    yaw: i32,
    horizon: i32,
    object: ObjectId,
    class: ClassId,
    action: String,
    steps: usize,
    split: Split,
    features: String,
}

/// One row per sample; the sparse features are `index:value` pairs.
pub fn write_dataset_csv<W: Write>(out: W, ds: &BcDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in &ds.samples {
        w.serialize(Row {
            scene: s.scene,
            x: s.state.x,
            z: s.state.z,
            yaw: s.state.yaw.degrees(),
            horizon: s.state.horizon,
            object: s.object,
            class: s.class,
            action: s.action.name().to_string(),
            steps: s.steps,
            split: s.split,
            features: s.features.encode(),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(input: R) -> Result<BcDataset> {
    let mut r = csv::Reader::from_reader(input);
    let mut ds = BcDataset::default();
    for (line, row) in r.deserialize::<Row>().enumerate() {
        let row = row?;
        let bad = |what: &str| Error::Parse(format!("dataset row {}: bad {what}", line + 2));
        let mut state = AgentState::new(row.x, row.z, Yaw::from_degrees(row.yaw));
        state.horizon = row.horizon;
        ds.samples.push(Sample {
            scene: row.scene,
            state,
            object: row.object,
            class: row.class,
            action: FineAction::from_name(&row.action).ok_or_else(|| bad("action"))?,
            steps: row.steps,
            split: row.split,
            features: FeatureVector::decode(&row.features).ok_or_else(|| bad("features"))?,
        });
    }
    Ok(ds)
}
