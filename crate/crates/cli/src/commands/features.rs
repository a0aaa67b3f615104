use std::path::{Path, PathBuf};

use clap::Args;
use eco_core::features::{
    import_features, read_ecof_file, validate_features, write_ecof_file, BaselineExtractor, Domain, EcofFile,
    FeatureSidecar, DEFAULT_DIM,
};
use eco_core::pipeline::extract_features;
use eco_core::strips::{StripManifest, StripRecord};
use serde::{Deserialize, Serialize};

use super::strips::manifest_in;
use super::{write_json, Command, Report};
use crate::config::required;
use crate::error::{CliError, CliResult};

/// Describe strips with the baseline extractor, or import external features.
#[derive(Args, Debug, Serialize)]
pub struct FeaturesArgs {
    #[arg(long, value_parser = ["baseline", "import"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extractor: Option<String>,
    /// Strip directory (baseline) or ECOF file (import).
    #[arg(long = "in")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Strip manifest the imported ids are joined against.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strips: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[arg(long, value_parser = ["train", "test"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSettings {
    pub extractor: String,
    pub input: Option<PathBuf>,
    pub strips: Option<PathBuf>,
    pub dim: usize,
    pub domain: String,
    pub out: Option<PathBuf>,
}

impl Default for FeaturesSettings {
    fn default() -> Self {
        Self {
            extractor: "baseline".into(),
            input: None,
            strips: None,
            dim: DEFAULT_DIM,
            domain: "train".into(),
            out: None,
        }
    }
}

fn load_strips(path: &Path) -> CliResult<StripManifest> {
    StripManifest::load(path).map_err(|e| CliError::from(e).context(path.display()))
}

impl Command for FeaturesSettings {
    const NAME: &'static str = "features";

    fn run(&self) -> CliResult<Report> {
        let input = required(&self.input, "in")?;
        let out = required(&self.out, "out")?;
        let domain: Domain = self.domain.parse()?;
        if self.dim == 0 {
            return Err(CliError::usage("--dim must be positive"));
        }
        let mut report = Report::for_file(out);
        let (file, strips): (EcofFile, Vec<StripRecord>) = match self.extractor.as_str() {
            "baseline" => {
                let path = manifest_in(input, "strips.json");
                let manifest = load_strips(&path)?;
                let dir = path.parent().unwrap_or(Path::new("."));
                let file = extract_features(&manifest, dir, &BaselineExtractor { dim: self.dim })?;
                report.inputs.push(path.clone());
                report.inputs.extend(manifest.strips.iter().map(|s| dir.join(&s.path)));
                (file, manifest.strips)
            }
            "import" => {
                let strips_path = manifest_in(required(&self.strips, "strips")?, "strips.json");
                let manifest = load_strips(&strips_path)?;
                let raw = read_ecof_file(input).map_err(|e| CliError::from(e).context(input.display()))?;
                if raw.dim != self.dim {
                    return Err(CliError::from(eco_core::Error::DimensionMismatch {
                        expected: self.dim,
                        got: raw.dim,
                    })
                    .context(input.display()));
                }
                let joined = import_features(&raw, &manifest.strips, domain);
                validate_features(&joined.vectors, self.dim)?;
                if !joined.unmatched.is_empty() {
                    eprintln!(
                        "eco: warning: {} feature ids have no strip record",
                        joined.unmatched.len()
                    );
                }
                let keep: std::collections::HashMap<u64, &StripRecord> =
                    manifest.strips.iter().map(|s| (s.id, s)).collect();
                let strips = joined.vectors.iter().map(|v| keep[&v.id].clone()).collect();
                let file = EcofFile {
                    dim: self.dim,
                    records: joined.vectors.into_iter().map(|v| (v.id, v.values)).collect(),
                };
                report.inputs = vec![input.to_path_buf(), strips_path];
                (file, strips)
            }
            other => return Err(CliError::usage(format!("unknown extractor '{other}'"))),
        };
        if let Some(parent) = out.parent() {
            std::fs::create_dir_all(parent)?;
        }
        write_ecof_file(out, &file)?;
        let sidecar_path = FeatureSidecar::path_for(out);
        write_json(
            &sidecar_path,
            &FeatureSidecar {
                dim: self.dim,
                domain,
                extractor: self.extractor.clone(),
                strips,
            },
        )?;
        report.outputs = vec![out.to_path_buf(), sidecar_path];
        println!(
            "{} vectors of dim {} -> {}",
            file.records.len(),
            file.dim,
            out.display()
        );
        Ok(report)
    }
}
