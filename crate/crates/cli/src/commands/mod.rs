use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliResult;
use crate::manifest::{hash_all, manifest_path, RunManifest};

pub mod adapt;
pub mod annotate;
pub mod eval;
pub mod features;
pub mod strips;
pub mod synth;
pub mod warp;

/// Files a command read and wrote, in a fixed order.
pub struct Report {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    /// Where the run manifest goes.
    pub manifest: PathBuf,
    pub seed: Option<u64>,
}

impl Report {
    pub fn for_dir(out: &Path) -> Self {
        Self {
            inputs: Vec::new(),
            outputs: Vec::new(),
            manifest: manifest_path(out, true),
            seed: None,
        }
    }

    pub fn for_file(out: &Path) -> Self {
        Self {
            inputs: Vec::new(),
            outputs: Vec::new(),
            manifest: manifest_path(out, false),
            seed: None,
        }
    }
}

pub trait Command: Serialize + DeserializeOwned + Default {
    const NAME: &'static str;
    fn run(&self) -> CliResult<Report>;
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Run a command and record it.
pub fn execute<C: Command>(settings: &C) -> CliResult<RunManifest> {
    let report = settings.run()?;
    let manifest = RunManifest {
        tool: "eco".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: C::NAME.into(),
        config: serde_json::to_value(settings)?,
        seed: report.seed,
        inputs: hash_all(&report.inputs)?,
        outputs: hash_all(&report.outputs)?,
    };
    write_json(&report.manifest, &manifest)?;
    Ok(manifest)
}

/// Deserialize recorded settings and run them again.
pub fn execute_recorded(command: &str, config: serde_json::Value) -> CliResult<RunManifest> {
    fn go<C: Command>(config: serde_json::Value) -> CliResult<RunManifest> {
        execute(&serde_json::from_value::<C>(config)?)
    }
    match command {
        synth::SynthSettings::NAME => go::<synth::SynthSettings>(config),
        warp::WarpSettings::NAME => go::<warp::WarpSettings>(config),
        strips::StripsSettings::NAME => go::<strips::StripsSettings>(config),
        features::FeaturesSettings::NAME => go::<features::FeaturesSettings>(config),
        adapt::AdaptSettings::NAME => go::<adapt::AdaptSettings>(config),
        eval::RecallSettings::NAME => go::<eval::RecallSettings>(config),
        eval::ClassifySettings::NAME => go::<eval::ClassifySettings>(config),
        other => Err(crate::error::CliError::input(format!(
            "manifest names unknown command '{other}'"
        ))),
    }
}
