use nalgebra::{Vector2, Vector3};

use super::{CameraIntrinsics, Pose};
use crate::{Error, Result};

const MIN_BASELINE: f64 = 1e-12;
/// Squared sine of the smallest ray angle we accept.
const MIN_SIN2: f64 = 1e-14;

/// Midpoint of the shortest segment between the two back-projected rays.
pub fn triangulate(
    k: &CameraIntrinsics,
    obs_a: &Vector2<f64>,
    pose_a: &Pose,
    obs_b: &Vector2<f64>,
    pose_b: &Pose,
) -> Result<Vector3<f64>> {
    let baseline = pose_a.center - pose_b.center;
    if baseline.norm() <= MIN_BASELINE {
        return Err(Error::DegenerateBaseline);
    }
    let da = pose_a.ray_direction(k, obs_a);
    let db = pose_b.ray_direction(k, obs_b);

    let a = da.dot(&da);
    let b = da.dot(&db);
    let c = db.dot(&db);
    let d = da.dot(&baseline);
    let e = db.dot(&baseline);
    let denom = a * c - b * b;
    if denom <= MIN_SIN2 * a * c {
        return Err(Error::DegenerateBaseline);
    }
    let t = (b * e - c * d) / denom;
    let s = (a * e - b * d) / denom;
    let pa = pose_a.center + da * t;
    let pb = pose_b.center + db * s;
    Ok((pa + pb) * 0.5)
}
