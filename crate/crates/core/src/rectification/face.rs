use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const COPLANAR_TOL: f64 = 1e-6;

/// Planar cuboid surface with a vertical edge of known physical height.
///
/// Corners run top-left, top-right, bottom-right, bottom-left as seen from
/// outside the box with gravity pointing down.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuboidFace {
    /// Outward unit normal, world frame.
    pub normal: Vector3<f64>,
    /// Plane offset: `normal . X = offset` for points on the face.
    pub offset: f64,
    pub corners: [Vector3<f64>; 4],
    /// Length of the vertical edges, world units.
    pub height: f64,
}

impl CuboidFace {
    pub fn new(normal: Vector3<f64>, corners: [Vector3<f64>; 4]) -> Result<Self> {
        let n = normal.norm();
        if !(n > 0.0) {
            return Err(Error::InvalidArgument("face normal has zero length".into()));
        }
        let normal = normal / n;
        let offset = normal.dot(&corners[0]);
        for c in &corners {
            if (normal.dot(c) - offset).abs() > COPLANAR_TOL {
                return Err(Error::InvalidArgument("face corners are not coplanar".into()));
            }
        }
        let height = (corners[3] - corners[0]).norm();
        Ok(Self {
            normal,
            offset,
            corners,
            height,
        })
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.corners.iter().sum::<Vector3<f64>>() / 4.0
    }

    pub fn width(&self) -> f64 {
        (self.corners[1] - self.corners[0]).norm()
    }

    /// The left vertical edge, top then bottom.
    pub fn vertical_edge(&self) -> (Vector3<f64>, Vector3<f64>) {
        (self.corners[0], self.corners[3])
    }

    /// Point on the face at fractional position `(along, down)` in `[0, 1]^2`
    /// measured from the top-left corner.
    pub fn point_at(&self, along: f64, down: f64) -> Vector3<f64> {
        let top = self.corners[0] + (self.corners[1] - self.corners[0]) * along;
        let bottom = self.corners[3] + (self.corners[2] - self.corners[3]) * along;
        top + (bottom - top) * down
    }
}
