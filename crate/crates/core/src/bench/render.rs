//! Per-step map renders written as binary PPM (P6) images.
//!
//! Each image is a row of square panels, one per rendered semantic
//! channel, showing the map's probability as a heat ramp with the
//! trajectory so far drawn on top.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::control::StepView;
use crate::error::{Error, Result};
use crate::planner::TaskSpec;
use crate::scene_repr::export::{encode_ppm, heat_color};
use crate::world::{Affordance, Catalog};

const SCALE: usize = 4;
const GAP: usize = 2;
const TRAIL: [u8; 3] = [0, 0, 0];
const AGENT: [u8; 3] = [40, 220, 60];
const TARGET: [u8; 3] = [255, 220, 0];

/// Collects the trajectory and writes one image per observed step.
pub struct MapRenderer {
    dir: PathBuf,
    channels: Vec<usize>,
    /// Grids visited so far, indexed by grid.
    trail: Vec<bool>,
    frames: usize,
    error: Option<Error>,
}

impl MapRenderer {
    /// Render the given semantic channels into `dir`, created if missing.
    pub fn new(dir: &Path, channels: Vec<usize>) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(MapRenderer {
            dir: dir.to_path_buf(),
            channels,
            trail: Vec::new(),
            frames: 0,
            error: None,
        })
    }

    /// Navigability plus the task's object and receptacle classes.
    pub fn for_task(dir: &Path, catalog: &Catalog, task: &TaskSpec) -> Result<Self> {
        let mut channels = vec![catalog.affordance_index(Affordance::Navigable)];
        for name in [
            Some(&task.object),
            task.movable_receptacle.as_ref(),
            Some(&task.receptacle),
        ]
        .into_iter()
        .flatten()
        {
            if let Some(c) = catalog.id(name) {
                channels.push(c);
            }
        }
        Self::new(dir, channels)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Pixels of the current view, `(width, height, rgb)`.
    pub fn draw(&self, view: &StepView) -> (usize, usize, Vec<u8>) {
        let m = view.map.m;
        let side = m * SCALE;
        let width = self.channels.len() * side + (self.channels.len().saturating_sub(1)) * GAP;
        let mut rgb = vec![80u8; width * side * 3];
        let agent = view.map.grid_of(view.pose.x, view.pose.z);
        for (k, &channel) in self.channels.iter().enumerate() {
            let x0 = k * (side + GAP);
            for g in 0..m * m {
                let mut color = heat_color(view.memory.prob(g, channel));
                if Some(g) == view.target_grid {
                    color = TARGET;
                }
                if self.trail.get(g).copied().unwrap_or(false) {
                    color = TRAIL;
                }
                if Some(g) == agent {
                    color = AGENT;
                }
                let (gx, gz) = (g % m, g / m);
                for dy in 0..SCALE {
                    // +z points up, as in the map snapshots
                    let row = (m - 1 - gz) * SCALE + dy;
                    for dx in 0..SCALE {
                        let i = (row * width + x0 + gx * SCALE + dx) * 3;
                        rgb[i..i + 3].copy_from_slice(&color);
                    }
                }
            }
        }
        (width, side, rgb)
    }

    /// Record the step and write its image. The first I/O error is kept
    /// and reported by [`MapRenderer::finish`].
    pub fn observe(&mut self, view: &StepView) {
        if self.error.is_some() {
            return;
        }
        if self.trail.is_empty() {
            self.trail = vec![false; view.map.m * view.map.m];
        }
        if let Some(g) = view.map.grid_of(view.pose.x, view.pose.z) {
            self.trail[g] = true;
        }
        let (w, h, rgb) = self.draw(view);
        let path = self.dir.join(format!("step_{:05}.ppm", self.frames));
        let written =
            fs::File::create(&path).and_then(|mut f| f.write_all(&encode_ppm(w, h, &rgb)));
        match written {
            Ok(()) => self.frames += 1,
            Err(e) => self.error = Some(e.into()),
        }
    }

    pub fn finish(self) -> Result<usize> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.frames),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::AgentSetup;
    use crate::scene_repr::export::decode_ppm;
    use crate::world::{generate_scene, SceneGenConfig, World};
    use std::sync::Arc;

    #[test]
    fn renders_one_image_per_step() {
        let catalog = Arc::new(Catalog::default());
        let scene = generate_scene(&SceneGenConfig::default(), catalog.clone(), 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut r = MapRenderer::new(dir.path(), vec![0, 1]).unwrap();
        {
            let world = World::new(scene, Default::default());
            let mut agent =
                crate::control::Agent::new(world, &AgentSetup::default(), None).unwrap();
            let mut sink = |v: &StepView| r.observe(v);
            agent.set_observer(move |v| sink(v));
            agent.execute(crate::world::Action::RotateRight);
            agent.execute(crate::world::Action::RotateRight);
        }
        assert_eq!(r.finish().unwrap(), 2);
        let bytes = std::fs::read(dir.path().join("step_00001.ppm")).unwrap();
        let (w, h, _) = decode_ppm(&bytes).unwrap();
        assert_eq!(h % SCALE, 0);
        assert_eq!(w, 2 * h + GAP);
    }
}
