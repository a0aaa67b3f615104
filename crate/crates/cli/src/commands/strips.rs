use std::path::{Path, PathBuf};

use clap::Args;
use eco_core::pipeline::{cut_strips, WarpManifest};
use eco_core::strips::DEFAULT_STRIP_WIDTH;
use serde::{Deserialize, Serialize};

use super::{write_json, Command, Report};
use crate::config::required;
use crate::error::{CliError, CliResult};

/// Cut warped faces into fixed-width strips on the square canvas.
#[derive(Args, Debug, Serialize)]
pub struct StripsArgs {
    /// Output directory of `eco warp`, or its `warps.json`.
    #[arg(long = "in")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Strip width in canonical-view pixels.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StripsSettings {
    pub input: Option<PathBuf>,
    pub width: u32,
    pub out: Option<PathBuf>,
}

impl Default for StripsSettings {
    fn default() -> Self {
        Self {
            input: None,
            width: DEFAULT_STRIP_WIDTH,
            out: None,
        }
    }
}

/// `dir/name` when `path` is a directory, `path` itself otherwise.
pub fn manifest_in(path: &Path, name: &str) -> PathBuf {
    if path.is_dir() {
        path.join(name)
    } else {
        path.to_path_buf()
    }
}

impl Command for StripsSettings {
    const NAME: &'static str = "strips";

    fn run(&self) -> CliResult<Report> {
        let input = manifest_in(required(&self.input, "in")?, "warps.json");
        let out = required(&self.out, "out")?;
        let warps = WarpManifest::load(&input).map_err(|e| CliError::from(e).context(input.display()))?;
        let warp_dir = input.parent().unwrap_or(Path::new("."));
        std::fs::create_dir_all(out)?;
        let manifest = cut_strips(&warps, warp_dir, self.width, out)?;
        let path = out.join("strips.json");
        write_json(&path, &manifest)?;

        let mut report = Report::for_dir(out);
        report.inputs.push(input.clone());
        report
            .inputs
            .extend(warps.faces.iter().map(|f| warp_dir.join(&f.image)));
        report.outputs.push(path);
        report.outputs.extend(manifest.strips.iter().map(|s| out.join(&s.path)));
        println!("{} strips -> {}", manifest.strips.len(), out.display());
        Ok(report)
    }
}
