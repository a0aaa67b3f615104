//! Strip descriptors.
//!
//! Any [`FeatureExtractor`] turns a normalized strip into a fixed-length
//! vector. [`BaselineExtractor`] is a deterministic hand-crafted descriptor;
//! deep features computed elsewhere come in through the `ECOF` files read by
//! [`import_features`].

mod baseline;
mod ecof;

use std::collections::{HashMap, HashSet};
use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

pub use baseline::{BaselineExtractor, GRID, HUE_BINS, ORIENTATION_BINS};
pub use ecof::{read_ecof, read_ecof_file, write_ecof, write_ecof_file, EcofFile, ECOF_MAGIC, ECOF_VERSION};

use crate::strips::StripRecord;
use crate::{Error, Result};

/// Feature length used unless configured otherwise.
pub const DEFAULT_DIM: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "train-store")]
    Train,
    #[serde(rename = "test-store")]
    Test,
}

impl std::str::FromStr for Domain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" | "train-store" => Ok(Domain::Train),
            "test" | "test-store" => Ok(Domain::Test),
            _ => Err(Error::InvalidArgument(format!("unknown domain '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub id: u64,
    pub values: Vec<f32>,
    pub domain: Domain,
    pub category: Option<String>,
}

pub trait FeatureExtractor: Send + Sync {
    fn dim(&self) -> usize;
    fn extract(&self, strip: &RgbImage) -> Vec<f32>;
}

/// Metadata written next to every feature file (`<file>.json`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub dim: usize,
    pub domain: Domain,
    pub extractor: String,
    pub strips: Vec<StripRecord>,
}

impl FeatureSidecar {
    pub fn path_for(features: &Path) -> std::path::PathBuf {
        let mut s = features.as_os_str().to_owned();
        s.push(".json");
        s.into()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("feature sidecar {}: {e}", path.display())))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImportReport {
    pub vectors: Vec<FeatureVector>,
    /// Ids present in the file but absent from the strip manifest.
    pub unmatched: Vec<u64>,
}

/// Join an `ECOF` file against strip metadata.
pub fn import_features(file: &EcofFile, strips: &[StripRecord], domain: Domain) -> ImportReport {
    let by_id: HashMap<u64, &StripRecord> = strips.iter().map(|s| (s.id, s)).collect();
    let mut vectors = Vec::with_capacity(file.records.len());
    let mut unmatched = Vec::new();
    for (id, values) in &file.records {
        match by_id.get(id) {
            Some(rec) => vectors.push(FeatureVector {
                id: *id,
                values: values.clone(),
                domain,
                category: Some(rec.category.clone()),
            }),
            None => unmatched.push(*id),
        }
    }
    ImportReport { vectors, unmatched }
}

/// Check a feature set for the run-level invariants: shared dimension,
/// finite entries, unique ids.
pub fn validate_features(vectors: &[FeatureVector], dim: usize) -> Result<()> {
    let mut seen = HashSet::new();
    for v in vectors {
        if v.values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.values.len(),
            });
        }
        if v.values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Format(format!("feature {} has non-finite entries", v.id)));
        }
        if !seen.insert(v.id) {
            return Err(Error::DuplicateId(v.id));
        }
    }
    Ok(())
}
