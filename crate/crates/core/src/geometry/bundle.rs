//! Reconstruction bundle: calibrated intrinsics plus one pose per frame.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Deserializer, Serialize};

use super::{CameraIntrinsics, Pose};
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BundleFrame {
    #[serde(deserialize_with = "string_or_number")]
    pub id: String,
    pub image_path: String,
    /// World-to-camera rotation, row-major.
    #[serde(rename = "R")]
    pub rotation: [f64; 9],
    /// Camera center.
    #[serde(rename = "C")]
    pub center: [f64; 3],
}

impl BundleFrame {
    pub fn pose(&self) -> Pose {
        Pose {
            rotation: Matrix3::from_row_slice(&self.rotation),
            center: Vector3::from_column_slice(&self.center),
        }
    }

    pub fn from_pose(id: impl Into<String>, image_path: impl Into<String>, pose: &Pose) -> Self {
        let mut rotation = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                rotation[r * 3 + c] = pose.rotation[(r, c)];
            }
        }
        Self {
            id: id.into(),
            image_path: image_path.into(),
            rotation,
            center: [pose.center.x, pose.center.y, pose.center.z],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Bundle {
    pub intrinsics: CameraIntrinsics,
    pub frames: Vec<BundleFrame>,
    /// Directory that relative image paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Bundle {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut bundle = Self::from_json(&text)?;
        bundle.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(bundle)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bundle: Bundle = serde_json::from_str(text).map_err(|e| Error::Format(format!("bundle: {e}")))?;
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        let mut seen = std::collections::HashSet::new();
        for frame in &self.frames {
            frame
                .pose()
                .validate()
                .map_err(|e| Error::Format(format!("frame '{}': {e}", frame.id)))?;
            if !seen.insert(frame.id.as_str()) {
                return Err(Error::Format(format!("duplicate frame id '{}'", frame.id)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn frame(&self, id: &str) -> Result<&BundleFrame> {
        self.frames.iter().find(|f| f.id == id).ok_or_else(|| Error::NotFound {
            what: "frame",
            id: id.to_string(),
        })
    }

    pub fn image_path(&self, frame: &BundleFrame) -> PathBuf {
        self.base_dir.join(&frame.image_path)
    }
}

fn string_or_number<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        Str(String),
        Int(u64),
    }
    Ok(match Id::deserialize(de)? {
        Id::Str(s) => s,
        Id::Int(n) => n.to_string(),
    })
}
