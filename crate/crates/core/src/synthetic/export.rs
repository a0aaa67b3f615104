use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::render::{render_frame, FrameTruth};
use super::scene::SyntheticScene;
use crate::annotation::{Cuboid, LabelExport};
use crate::geometry::Bundle;
use crate::pipeline::save_png;
use crate::Result;

/// `truth.json`: the scene description and per-frame ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneTruth {
    pub scene: SyntheticScene,
    pub frames: Vec<FrameTruth>,
}

#[derive(Clone, Debug)]
pub struct SceneFiles {
    pub bundle: PathBuf,
    pub labels: PathBuf,
    pub truth: PathBuf,
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Render every frame into `out_dir/frames/` and write `bundle.json`,
/// `labels.json` (the scene boxes and their projections) and `truth.json`.
pub fn write_scene(scene: &SyntheticScene, out_dir: &Path) -> Result<SceneFiles> {
    fs::create_dir_all(out_dir.join("frames"))?;
    let rendered: Vec<_> = (0..scene.poses.len())
        .into_par_iter()
        .map(|i| {
            let r = render_frame(scene, i);
            save_png(&r.image, &out_dir.join(&r.frame.image_path))?;
            Ok((r.frame, r.truth))
        })
        .collect::<Result<_>>()?;
    let (frames, truths): (Vec<_>, Vec<_>) = rendered.into_iter().unzip();
    let bundle = Bundle {
        intrinsics: scene.intrinsics,
        frames,
        base_dir: out_dir.to_path_buf(),
    };
    let boxes: Vec<(u64, Cuboid)> = scene
        .boxes
        .iter()
        .enumerate()
        .map(|(i, b)| (i as u64, b.cuboid.clone()))
        .collect();
    let files = SceneFiles {
        bundle: out_dir.join("bundle.json"),
        labels: out_dir.join("labels.json"),
        truth: out_dir.join("truth.json"),
    };
    write_json(&files.bundle, &bundle)?;
    write_json(&files.labels, &LabelExport::build(&bundle, &boxes))?;
    write_json(
        &files.truth,
        &SceneTruth {
            scene: scene.clone(),
            frames: truths,
        },
    )?;
    Ok(files)
}
