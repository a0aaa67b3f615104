use std::path::{Path, PathBuf};

use clap::Args;
use eco_core::adaptation::{train, write_ecoa_file, AdapterManifest, Reconstruction, TrainingConfig};
use eco_core::features::read_ecof_file;
use serde::{Deserialize, Serialize};

use super::{write_json, Command, Report};
use crate::config::required;
use crate::error::{CliError, CliResult};

/// Train the feature adapter from train-store to test-store features.
#[derive(Args, Debug, Serialize)]
pub struct AdaptArgs {
    /// Train-store features (ECOF).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    /// Test-store features (ECOF).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    /// Weight of the reconstruction term.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Discriminator updates per generator update.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_steps: Option<usize>,
    /// Hidden layer widths, e.g. `--hidden 2048` or `--hidden 512,512`.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
    #[arg(long, value_parser = ["mse", "l2"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptSettings {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub alpha: f64,
    pub weight_decay: f64,
    pub batch: usize,
    pub lr: f64,
    pub momentum: f64,
    pub steps: usize,
    pub d_steps: usize,
    pub hidden: Vec<usize>,
    pub reconstruction: String,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for AdaptSettings {
    fn default() -> Self {
        let c = TrainingConfig::default();
        Self {
            train: None,
            test: None,
            alpha: c.alpha,
            weight_decay: c.weight_decay,
            batch: c.batch_size,
            lr: c.learning_rate,
            momentum: c.momentum,
            steps: c.iterations,
            d_steps: c.d_steps,
            hidden: c.hidden,
            reconstruction: "mse".into(),
            seed: c.seed,
            out: None,
        }
    }
}

pub fn load_rows(path: &Path) -> CliResult<(Vec<u64>, Vec<Vec<f64>>)> {
    let file = read_ecof_file(path).map_err(|e| CliError::from(e).context(path.display()))?;
    Ok(file
        .records
        .into_iter()
        .map(|(id, v)| (id, v.into_iter().map(f64::from).collect()))
        .unzip())
}

impl AdaptSettings {
    fn config(&self) -> CliResult<TrainingConfig> {
        let reconstruction = match self.reconstruction.as_str() {
            "mse" => Reconstruction::Mse,
            "l2" => Reconstruction::L2,
            other => return Err(CliError::usage(format!("unknown reconstruction '{other}'"))),
        };
        let config = TrainingConfig {
            batch_size: self.batch,
            alpha: self.alpha,
            weight_decay: self.weight_decay,
            learning_rate: self.lr,
            momentum: self.momentum,
            iterations: self.steps,
            seed: self.seed,
            d_steps: self.d_steps,
            hidden: self.hidden.clone(),
            reconstruction,
        };
        config.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(config)
    }
}

impl Command for AdaptSettings {
    const NAME: &'static str = "adapt-train";

    fn run(&self) -> CliResult<Report> {
        let train_path = required(&self.train, "train")?;
        let test_path = required(&self.test, "test")?;
        let out = required(&self.out, "out")?;
        let config = self.config()?;
        let (_, train_rows) = load_rows(train_path)?;
        let (_, test_rows) = load_rows(test_path)?;
        let outcome = train(&train_rows, &test_rows, &config)?;
        if let Some(parent) = out.parent() {
            std::fs::create_dir_all(parent)?;
        }
        write_ecoa_file(out, &outcome.model)?;
        let mut sidecar = out.as_os_str().to_owned();
        sidecar.push(".json");
        let sidecar = PathBuf::from(sidecar);
        write_json(
            &sidecar,
            &AdapterManifest {
                dim: outcome.model.dim(),
                config,
                losses: outcome.losses.clone(),
            },
        )?;

        let mut report = Report::for_file(out);
        report.seed = Some(self.seed);
        report.inputs = vec![train_path.to_path_buf(), test_path.to_path_buf()];
        report.outputs = vec![out.to_path_buf(), sidecar];
        if let Some(last) = outcome.losses.last() {
            println!(
                "iteration {}: L(D) {:.6} L(F,G) {:.6} -> {}",
                last.iteration,
                last.discriminator,
                last.generator,
                out.display()
            );
        }
        Ok(report)
    }
}
