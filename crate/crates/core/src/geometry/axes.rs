use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{unit, CameraIntrinsics, Pose};
use crate::{Error, Result};

/// Minimum angle between the two clicked horizontal directions.
const MIN_AXIS_ANGLE: f64 = 1e-3;

/// Principal scene directions: two horizontal axes and gravity, world frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneAxes {
    pub x_dir: Vector3<f64>,
    pub y_dir: Vector3<f64>,
    pub gravity: Vector3<f64>,
}

impl SceneAxes {
    /// Axes from two vanishing points clicked in one frame.
    ///
    /// Gravity is the cross product of the recovered horizontal directions,
    /// then `y_dir` is rebuilt as `gravity x x_dir` so the triple is exactly
    /// orthonormal and right-handed.
    pub fn from_vanishing_points(
        k: &CameraIntrinsics,
        pose: &Pose,
        vp_x: &Vector2<f64>,
        vp_y: &Vector2<f64>,
    ) -> Result<Self> {
        let x_dir = axis_from_vanishing_point(k, pose, vp_x);
        let y_dir = axis_from_vanishing_point(k, pose, vp_y);
        let gravity = gravity_from_axes(&x_dir, &y_dir, pose)?;
        Ok(Self {
            x_dir,
            y_dir: gravity.cross(&x_dir),
            gravity,
        })
    }

    /// Re-orthonormalize, keeping `x_dir` and the side of `gravity`.
    pub fn orthonormalized(&self) -> Result<Self> {
        let x_dir = unit(self.x_dir);
        let mut gravity = x_dir.cross(&self.y_dir);
        let n = gravity.norm();
        if !(n > MIN_AXIS_ANGLE.sin()) {
            return Err(Error::DegenerateAxes("x and y directions are parallel"));
        }
        gravity /= n;
        if gravity.dot(&self.gravity) < 0.0 {
            gravity = -gravity;
        }
        Ok(Self {
            x_dir,
            y_dir: gravity.cross(&x_dir),
            gravity,
        })
    }

    /// Axis as row-major 3x3 `[x_dir; y_dir; gravity]`.
    pub fn to_row_major(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for (row, v) in [self.x_dir, self.y_dir, self.gravity].iter().enumerate() {
            out[row * 3..row * 3 + 3].copy_from_slice(v.as_slice());
        }
        out
    }

    pub fn from_row_major(m: &[f64; 9]) -> Self {
        Self {
            x_dir: Vector3::new(m[0], m[1], m[2]),
            y_dir: Vector3::new(m[3], m[4], m[5]),
            gravity: Vector3::new(m[6], m[7], m[8]),
        }
    }

    /// Scene axis by index: 0 = x, 1 = y, 2 = gravity.
    pub fn axis(&self, i: usize) -> Vector3<f64> {
        match i {
            0 => self.x_dir,
            1 => self.y_dir,
            _ => self.gravity,
        }
    }
}

/// World direction whose vanishing point is `vp`: `unit(R^T K^-1 [vp; 1])`.
///
/// A vanishing point fixes a line, not a ray. The returned direction has a
/// non-negative component along the viewing axis. For horizontal scene
/// directions this is the same as testing against the viewing axis'
/// horizontal component.
pub fn axis_from_vanishing_point(k: &CameraIntrinsics, pose: &Pose, vp: &Vector2<f64>) -> Vector3<f64> {
    let d = unit(pose.rotation.transpose() * k.backproject(vp));
    if d.dot(&pose.viewing_direction()) < 0.0 {
        -d
    } else {
        d
    }
}

/// `unit(x_dir x y_dir)`, signed to point image-down in `reference`.
pub fn gravity_from_axes(x_dir: &Vector3<f64>, y_dir: &Vector3<f64>, reference: &Pose) -> Result<Vector3<f64>> {
    let cross = unit(*x_dir).cross(&unit(*y_dir));
    let n = cross.norm();
    if !(n > MIN_AXIS_ANGLE.sin()) {
        return Err(Error::DegenerateAxes("vanishing directions are (near) parallel"));
    }
    let g = cross / n;
    if (reference.rotation * g).y < 0.0 {
        Ok(-g)
    } else {
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::project_direction;
    use nalgebra::Rotation3;
    use rand::{Rng, SeedableRng};

    fn k720() -> CameraIntrinsics {
        CameraIntrinsics::new(1000.0, 1000.0, 640.0, 360.0, 1280, 720).unwrap()
    }

    fn angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
        a.cross(b).norm().atan2(a.dot(b))
    }

    #[test]
    fn principal_point_is_optical_axis() {
        let d = axis_from_vanishing_point(&k720(), &Pose::identity(), &Vector2::new(640.0, 360.0));
        assert!((d - Vector3::z()).norm() < 1e-15);
    }

    #[test]
    fn offset_vanishing_point() {
        let d = axis_from_vanishing_point(&k720(), &Pose::identity(), &Vector2::new(1640.0, 360.0));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((d - Vector3::new(s, 0.0, s)).norm() < 1e-12, "{d:?}");
    }

    #[test]
    fn recovers_projected_directions() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let k = k720();
        for _ in 0..500 {
            let rot = Rotation3::from_euler_angles(
                rng.random_range(-0.4..0.4),
                rng.random_range(-3.1..3.1),
                rng.random_range(-0.4..0.4),
            );
            let pose = Pose::new(*rot.matrix(), Vector3::zeros()).unwrap();
            let d = unit(Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ));
            let h = project_direction(&k, &pose, &d);
            if h.z.abs() < 1e-3 {
                continue;
            }
            let vp = Vector2::new(h.x / h.z, h.y / h.z);
            let rec = axis_from_vanishing_point(&k, &pose, &vp);
            let err = angle(&rec, &d).min(angle(&rec, &-d));
            assert!(err < 1e-6, "err {err}");
        }
    }

    #[test]
    fn gravity_sign_points_image_down() {
        let g = gravity_from_axes(&Vector3::x(), &Vector3::z(), &Pose::identity()).unwrap();
        assert_eq!(g, Vector3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn gravity_is_orthogonal_to_inputs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let rot = Rotation3::from_euler_angles(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let x = rot * Vector3::x();
            let y = rot * Vector3::y();
            let g = gravity_from_axes(&x, &y, &Pose::identity()).unwrap();
            assert!(g.dot(&x).abs() < 1e-9 && g.dot(&y).abs() < 1e-9);
            assert!((g.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn parallel_axes_are_degenerate() {
        let v = Vector3::new(0.3, 0.1, 1.0);
        let err = gravity_from_axes(&v, &(v * 2.0), &Pose::identity());
        assert!(matches!(err, Err(Error::DegenerateAxes(_))));
        let err = SceneAxes::from_vanishing_points(
            &k720(),
            &Pose::identity(),
            &Vector2::new(100.0, 200.0),
            &Vector2::new(100.0, 200.0),
        );
        assert!(matches!(err, Err(Error::DegenerateAxes(_))));
    }

    #[test]
    fn midline_vanishing_points_give_down_gravity() {
        let axes = SceneAxes::from_vanishing_points(
            &k720(),
            &Pose::identity(),
            &Vector2::new(2000.0, 360.0),
            &Vector2::new(-500.0, 360.0),
        )
        .unwrap();
        assert!((axes.gravity - Vector3::y()).norm() < 1e-12);
    }

    #[test]
    fn orthonormalization_is_idempotent() {
        let noisy = SceneAxes {
            x_dir: unit(Vector3::new(1.0, 0.02, 0.01)),
            y_dir: unit(Vector3::new(0.03, 0.01, 1.0)),
            gravity: Vector3::new(0.0, 1.0, 0.0),
        };
        let once = noisy.orthonormalized().unwrap();
        let twice = once.orthonormalized().unwrap();
        assert!((once.x_dir - twice.x_dir).norm() < 1e-15);
        assert!((once.y_dir - twice.y_dir).norm() < 1e-15);
        assert!((once.gravity - twice.gravity).norm() < 1e-15);
        assert!(once.gravity.dot(&once.x_dir).abs() < 1e-12);
        assert!(once.gravity.dot(&once.y_dir).abs() < 1e-12);
    }
}
