//! Settings resolution: flags over the `--config` TOML section over defaults.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

pub fn load_config(path: &Path) -> CliResult<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::from(e).context(path.display()))?;
    text.parse::<toml::Table>()
        .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
}

fn overlay(base: &mut Map<String, Value>, top: Value) {
    if let Value::Object(top) = top {
        for (k, v) in top {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
}

/// Defaults of `S`, then the config table `section`, then every flag that
/// was given.
pub fn resolve<S, F>(config: Option<&toml::Table>, section: &str, flags: &F) -> CliResult<S>
where
    S: Serialize + DeserializeOwned + Default,
    F: Serialize,
{
    let Value::Object(mut merged) = serde_json::to_value(S::default())? else {
        unreachable!("settings serialize to objects");
    };
    if let Some(table) = config.and_then(|c| c.get(section)) {
        let table = table
            .as_table()
            .ok_or_else(|| CliError::usage(format!("config section [{section}] must be a table")))?;
        overlay(&mut merged, serde_json::to_value(table)?);
    }
    overlay(&mut merged, serde_json::to_value(flags)?);
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::usage(format!("[{section}]: {e}")))
}

pub fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| CliError::usage(format!("missing required --{flag}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct S {
        a: u32,
        b: String,
        c: Option<PathBuf>,
    }

    #[derive(Serialize)]
    struct Flags {
        #[serde(skip_serializing_if = "Option::is_none")]
        a: Option<u32>,
        b: Option<String>,
    }

    #[test]
    fn precedence() {
        let cfg: toml::Table = "[x]\na = 3\nb = \"cfg\"\n".parse().unwrap();
        let s: S = resolve(Some(&cfg), "x", &Flags { a: Some(7), b: None }).unwrap();
        assert_eq!(
            s,
            S {
                a: 7,
                b: "cfg".into(),
                c: None
            }
        );
        let s: S = resolve(None, "x", &Flags { a: None, b: None }).unwrap();
        assert_eq!(s, S::default());
    }

    #[test]
    fn unknown_config_key_is_usage_error() {
        let cfg: toml::Table = "[x]\nz = 1\n".parse().unwrap();
        let err = resolve::<S, _>(Some(&cfg), "x", &Flags { a: None, b: None }).unwrap_err();
        assert_eq!(err.kind, crate::error::Kind::Usage);
    }
}
