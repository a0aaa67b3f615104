use std::path::PathBuf;

use clap::Args;
use eco_core::annotation::LabelExport;
use eco_core::geometry::Bundle;
use eco_core::pipeline::warp_bundle;
use serde::{Deserialize, Serialize};

use super::{write_json, Command, Report};
use crate::config::required;
use crate::error::{CliError, CliResult};

/// Frontalize and scale every labeled vertical face.
#[derive(Args, Debug, Serialize)]
pub struct WarpArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bundle: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    /// Store name recorded on every strip cut from these warps.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub store: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarpSettings {
    pub bundle: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub store: String,
    pub out: Option<PathBuf>,
}

impl Default for WarpSettings {
    fn default() -> Self {
        Self {
            bundle: None,
            labels: None,
            store: "store".into(),
            out: None,
        }
    }
}

impl Command for WarpSettings {
    const NAME: &'static str = "warp";

    fn run(&self) -> CliResult<Report> {
        let bundle_path = required(&self.bundle, "bundle")?;
        let labels_path = required(&self.labels, "labels")?;
        let out = required(&self.out, "out")?;
        let bundle = Bundle::load(bundle_path).map_err(|e| CliError::from(e).context(bundle_path.display()))?;
        let labels = LabelExport::load(labels_path).map_err(|e| CliError::from(e).context(labels_path.display()))?;
        std::fs::create_dir_all(out)?;
        let manifest = warp_bundle(&bundle, &labels, &self.store, out)?;
        let path = out.join("warps.json");
        write_json(&path, &manifest)?;

        let mut report = Report::for_dir(out);
        report.inputs = vec![bundle_path.to_path_buf(), labels_path.to_path_buf()];
        report.inputs.extend(bundle.frames.iter().map(|f| bundle.image_path(f)));
        report.outputs.push(path);
        report.outputs.extend(manifest.faces.iter().map(|f| out.join(&f.image)));
        println!(
            "{} faces warped, {} skipped -> {}",
            manifest.faces.len(),
            manifest.skipped.len(),
            out.display()
        );
        Ok(report)
    }
}
