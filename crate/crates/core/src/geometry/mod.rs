//! Pinhole camera algebra.
//!
//! Conventions: camera frame is x right, y down, z forward. A [`Pose`]
//! stores the world-to-camera rotation `R` and the camera center `C`, so a
//! world point `X` lands at `R (X - C)` in camera coordinates. Pixel
//! `(u, v)` is the image of the ray `K^-1 [u, v, 1]`, with integer
//! coordinates at pixel centers.

mod axes;
mod bundle;
mod camera;
mod triangulation;

pub use axes::{axis_from_vanishing_point, gravity_from_axes, SceneAxes};
pub use bundle::{Bundle, BundleFrame};
pub use camera::{project, project_direction, CameraIntrinsics, Pose, DEPTH_EPS};
pub use triangulation::triangulate;

use nalgebra::Vector3;

pub(crate) fn unit(v: Vector3<f64>) -> Vector3<f64> {
    v / v.norm()
}
