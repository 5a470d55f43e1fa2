//! Expert labelling and behavior cloning of the fine policy.
//!
//! The expert knows the whole scene. It enumerates the poses from which an
//! object can be interacted with, labels every pose a few fine actions away
//! with the first action of a shortest path there, and the fine policy is
//! fitted to those labels by softmax regression.

mod dataset;
mod expert;
mod train;

pub use dataset::{
    collect_dataset, collect_from_scenes, features_at, read_dataset_csv, scene_samples, world_pose,
    write_dataset_csv, BcDataset, DatasetConfig, Sample, Split,
};
pub use expert::{
    default_verb, expert_interactable_states, expert_label_short_horizon, expert_solve,
    rollout_labels, rollout_world, ExpertLabel, ExpertRun, PoseIndex,
};
pub use train::{accuracy, loss_and_gradients, train_bc, TrainConfig, TrainReport};
