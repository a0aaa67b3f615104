//! Scene descriptors as weighted means of strip features.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adaptation::{to_columns, AdaptationModel};
use crate::strips::StripRecord;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    /// `w_i = 1`.
    #[default]
    Uniform,
    /// `w_i = 1 / r_i`, with `r_i` the camera-to-strip distance.
    Proximity,
    /// Caller-supplied weights.
    Custom,
}

impl std::str::FromStr for WeightScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(WeightScheme::Uniform),
            "proximity" => Ok(WeightScheme::Proximity),
            "custom" => Ok(WeightScheme::Custom),
            _ => Err(Error::InvalidArgument(format!("unknown weight scheme '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneDescriptor {
    pub values: Vec<f64>,
    pub strip_ids: Vec<u64>,
    pub scheme: WeightScheme,
}

fn check_inputs<V: AsRef<[f64]>>(features: &[V], weights: &[f64]) -> Result<usize> {
    if features.is_empty() {
        return Err(Error::InvalidArgument("cannot compose an empty feature list".into()));
    }
    if features.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            got: weights.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "weights must be positive and finite, got {w}"
        )));
    }
    let dim = features[0].as_ref().len();
    for f in features {
        if f.as_ref().len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: f.as_ref().len(),
            });
        }
    }
    Ok(dim)
}

/// `(1 / sum w) * sum w_i f_i`.
///
/// Terms are accumulated in a canonical order (by weight, then values), so
/// the result does not depend on the order of the inputs at all.
pub fn compose<V: AsRef<[f64]>>(features: &[V], weights: &[f64]) -> Result<Vec<f64>> {
    let dim = check_inputs(features, weights)?;
    let mut order: Vec<usize> = (0..features.len()).collect();
    order.sort_by(|&a, &b| {
        weights[a].total_cmp(&weights[b]).then_with(|| {
            let (fa, fb) = (features[a].as_ref(), features[b].as_ref());
            fa.iter()
                .zip(fb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
    });
    let mut num = vec![0.0; dim];
    let mut den = 0.0;
    for i in order {
        let w = weights[i];
        den += w;
        for (n, v) in num.iter_mut().zip(features[i].as_ref()) {
            *n += w * v;
        }
    }
    num.iter_mut().for_each(|n| *n /= den);
    Ok(num)
}

/// `w_i = 1 / r_i`.
pub fn proximity_weights(distances: &[f64]) -> Result<Vec<f64>> {
    distances
        .iter()
        .map(|&r| {
            if r > 0.0 && r.is_finite() {
                Ok(1.0 / r)
            } else {
                Err(Error::InvalidArgument(format!(
                    "strip distance must be positive, got {r}"
                )))
            }
        })
        .collect()
}

/// Compose after mapping every feature through the adapter `F`.
pub fn compose_adapted<V: AsRef<[f64]>>(
    features: &[V],
    weights: &[f64],
    adapter: &AdaptationModel,
) -> Result<Vec<f64>> {
    let dim = check_inputs(features, weights)?;
    if dim != adapter.dim() {
        return Err(Error::DimensionMismatch {
            expected: adapter.dim(),
            got: dim,
        });
    }
    let rows: Vec<Vec<f64>> = features.iter().map(|f| f.as_ref().to_vec()).collect();
    let adapted = adapter.adapt_batch(&to_columns(&rows)?)?;
    let cols: Vec<Vec<f64>> = adapted.column_iter().map(|c| c.iter().copied().collect()).collect();
    compose(&cols, weights)
}

impl SceneDescriptor {
    /// Build a descriptor from strip features. `weights` is required for
    /// [`WeightScheme::Custom`] and [`WeightScheme::Proximity`] (as distances
    /// in the latter case) and ignored for uniform weighting.
    pub fn build<V: AsRef<[f64]>>(
        strip_ids: &[u64],
        features: &[V],
        scheme: WeightScheme,
        weights_or_distances: Option<&[f64]>,
        adapter: Option<&AdaptationModel>,
    ) -> Result<Self> {
        let weights = match (scheme, weights_or_distances) {
            (WeightScheme::Uniform, _) => vec![1.0; features.len()],
            (WeightScheme::Proximity, Some(r)) => proximity_weights(r)?,
            (WeightScheme::Custom, Some(w)) => w.to_vec(),
            (_, None) => {
                return Err(Error::InvalidArgument(format!(
                    "{scheme:?} weighting needs per-strip values"
                )));
            }
        };
        if strip_ids.len() != features.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                got: strip_ids.len(),
            });
        }
        let values = match adapter {
            Some(a) => compose_adapted(features, &weights, a)?,
            None => compose(features, &weights)?,
        };
        Ok(Self {
            values,
            strip_ids: strip_ids.to_vec(),
            scheme,
        })
    }
}

/// Strips seen in one frame on one labeled box.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SceneKey {
    pub store: String,
    pub frame: String,
    pub box_id: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneGroup {
    pub key: SceneKey,
    pub category: String,
    /// Indices into the strip list.
    pub members: Vec<usize>,
}

/// Group strips into scenes, ordered by key.
pub fn scene_groups(strips: &[StripRecord]) -> Vec<SceneGroup> {
    let mut map: BTreeMap<SceneKey, SceneGroup> = BTreeMap::new();
    for (i, s) in strips.iter().enumerate() {
        let key = SceneKey {
            store: s.store.clone(),
            frame: s.frame.clone(),
            box_id: s.box_id,
        };
        map.entry(key.clone())
            .or_insert_with(|| SceneGroup {
                key,
                category: s.category.clone(),
                members: Vec::new(),
            })
            .members
            .push(i);
    }
    map.into_values().collect()
}
