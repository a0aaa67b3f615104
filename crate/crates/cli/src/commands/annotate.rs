use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;

use clap::Args;
use eco_core::geometry::Bundle;
use eco_server::AppState;
use serde::{Deserialize, Serialize};

use crate::config::required;
use crate::error::{CliError, CliResult};

/// Serve the annotation API with a session open on one bundle.
#[derive(Args, Debug, Serialize)]
pub struct AnnotateArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bundle: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub host: Option<IpAddr>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub port: Option<u16>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotateSettings {
    pub bundle: Option<PathBuf>,
    pub host: IpAddr,
    pub port: u16,
}

impl Default for AnnotateSettings {
    fn default() -> Self {
        Self {
            bundle: None,
            host: IpAddr::from([127, 0, 0, 1]),
            port: 8080,
        }
    }
}

pub fn run(settings: &AnnotateSettings) -> CliResult<()> {
    let path = required(&settings.bundle, "bundle")?;
    let bundle = Bundle::load(path).map_err(|e| CliError::from(e).context(path.display()))?;
    let root = bundle.base_dir.clone();
    let state = AppState::new(Some(root));
    let id = state.open(bundle);
    println!("session {id} open on {}", path.display());
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(eco_server::serve(SocketAddr::new(settings.host, settings.port), state))?;
    Ok(())
}
