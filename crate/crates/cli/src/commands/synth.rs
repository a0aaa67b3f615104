use std::path::PathBuf;

use clap::Args;
use eco_core::synthetic::{generate, write_scene, Preset, SceneOptions};
use serde::{Deserialize, Serialize};

use super::{Command, Report};
use crate::config::required;
use crate::error::CliResult;

/// Generate a synthetic scene: frames, bundle, labels and ground truth.
#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    /// Scene layout.
    #[arg(long, value_parser = ["single-face", "aisle", "orbit"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Number of frames; defaults to the preset's trajectory length.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frames: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
    /// Focal length in pixels.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub focal: Option<f64>,
    /// Per-channel gain, e.g. `--tint 1.1,0.9,1.0`.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tint: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub preset: String,
    pub seed: u64,
    pub frames: Option<usize>,
    pub width: u32,
    pub height: u32,
    pub focal: f64,
    pub tint: [f64; 3],
    pub out: Option<PathBuf>,
}

impl Default for SynthSettings {
    fn default() -> Self {
        let o = SceneOptions::default();
        Self {
            preset: "single-face".into(),
            seed: 0,
            frames: o.frames,
            width: o.width,
            height: o.height,
            focal: o.focal,
            tint: o.tint,
            out: None,
        }
    }
}

impl Command for SynthSettings {
    const NAME: &'static str = "synth";

    fn run(&self) -> CliResult<Report> {
        let out = required(&self.out, "out")?;
        let preset: Preset = self.preset.parse()?;
        let options = SceneOptions {
            width: self.width,
            height: self.height,
            focal: self.focal,
            frames: self.frames,
            tint: self.tint,
        };
        let scene = generate(preset, self.seed, &options)?;
        let files = write_scene(&scene, out)?;
        let mut report = Report::for_dir(out);
        report.seed = Some(self.seed);
        report.outputs = vec![files.bundle.clone(), files.labels, files.truth];
        let bundle = eco_core::geometry::Bundle::load(&files.bundle)?;
        report
            .outputs
            .extend(bundle.frames.iter().map(|f| bundle.image_path(f)));
        println!(
            "{} frames, {} boxes -> {}",
            bundle.frames.len(),
            scene.boxes.len(),
            out.display()
        );
        Ok(report)
    }
}
