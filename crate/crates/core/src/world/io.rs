//! Scene files: pretty-printed versioned JSON.

use std::path::Path;

use super::scene::{GridScene, SCENE_FORMAT_VERSION};
use crate::error::{Error, Result};

pub fn scene_to_json(scene: &GridScene) -> String {
    let mut s = serde_json::to_string_pretty(scene).expect("scenes always serialize");
    s.push('\n');
    s
}

pub fn scene_from_json(text: &str) -> Result<GridScene> {
    let mut scene: GridScene = serde_json::from_str(text)?;
    if scene.version != SCENE_FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported scene version {}",
            scene.version
        )));
    }
    if scene.cells.len() != (scene.width * scene.height) as usize {
        return Err(Error::Parse(
            "cell grid does not match width x height".into(),
        ));
    }
    scene.reindex();
    Ok(scene)
}

pub fn save_scene(path: &Path, scene: &GridScene) -> Result<()> {
    std::fs::write(path, scene_to_json(scene))?;
    Ok(())
}

pub fn load_scene(path: &Path) -> Result<GridScene> {
    scene_from_json(&std::fs::read_to_string(path)?)
}
