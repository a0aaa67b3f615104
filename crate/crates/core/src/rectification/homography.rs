use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{apply_homography, row_major, CuboidFace};
use crate::geometry::{project, CameraIntrinsics, Pose};
use crate::{Error, Result};

/// Largest canvas side, in pixels.
pub const CANVAS_CAP: u32 = 8192;

/// Faces closer than this to horizontal cannot be frontalized.
pub const MIN_NORMAL_GRAVITY_DEG: f64 = 5.0;

const MIN_DET: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frontalization {
    /// Rows `r_x`, `r_y`, `r_z`: camera frame to object frame.
    pub rotation: Matrix3<f64>,
    /// `K R K^-1`.
    pub homography: Matrix3<f64>,
}

/// Frontalizing homography for a plane with camera-frame normal `normal`.
///
/// `r_z` is the normal oriented toward the object, `r_x = unit(g x r_z)` and
/// `r_y = r_z x r_x`, so `r_y` is the component of gravity in the plane.
pub fn frontalization_homography(
    k: &CameraIntrinsics,
    normal: &Vector3<f64>,
    gravity: &Vector3<f64>,
    object_dir: &Vector3<f64>,
) -> Result<Frontalization> {
    let n = normal.normalize();
    let g = gravity.normalize();
    if n.dot(&g).abs() >= MIN_NORMAL_GRAVITY_DEG.to_radians().cos() {
        return Err(Error::DegenerateOrientation {
            min_deg: MIN_NORMAL_GRAVITY_DEG,
        });
    }
    let r_z = if n.dot(object_dir) < 0.0 { -n } else { n };
    let r_x = g.cross(&r_z).normalize();
    let r_y = r_z.cross(&r_x);
    let rotation = Matrix3::from_rows(&[r_x.transpose(), r_y.transpose(), r_z.transpose()]);
    let homography = k.matrix() * rotation * k.inverse_matrix();
    Ok(Frontalization { rotation, homography })
}

/// Pixel height of the face's vertical edge after applying `h_o`.
pub fn measure_dv(h_o: &Matrix3<f64>, face: &CuboidFace, k: &CameraIntrinsics, pose: &Pose) -> Result<f64> {
    for c in &face.corners {
        project(k, pose, c)?;
    }
    let (top, bottom) = face.vertical_edge();
    let vt = apply_homography(h_o, &project(k, pose, &top)?).y;
    let vb = apply_homography(h_o, &project(k, pose, &bottom)?).y;
    Ok(vt.max(vb) - vt.min(vb))
}

/// `s = f_y / dv`.
pub fn scale_factor(fy: f64, dv: f64) -> Result<f64> {
    if !(dv > 0.0) || !dv.is_finite() {
        return Err(Error::InvalidSpan(dv));
    }
    Ok(fy / dv)
}

/// Full warp `W = T H_s H_O` and the canvas it targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpSpec {
    #[serde(with = "row_major")]
    pub h_o: Matrix3<f64>,
    #[serde(with = "row_major")]
    pub h_s: Matrix3<f64>,
    #[serde(with = "row_major")]
    pub translation: Matrix3<f64>,
    pub canvas_width: u32,
    pub canvas_height: u32,
    pub scale: f64,
    /// Pre-scale vertical span of the warped face, pixels.
    pub dv: f64,
    /// Face extent on the canvas before rasterization: width, height.
    pub face_extent: [f64; 2],
}

impl WarpSpec {
    pub fn warp(&self) -> Matrix3<f64> {
        self.translation * self.h_s * self.h_o
    }
}

/// Compose `T H_s H_O`, with `T` moving the scaled bounding box of
/// `warped_region` (face corners already mapped by `H_O`) to the origin.
pub fn compose_warp(h_o: &Matrix3<f64>, scale: f64, warped_region: &[Vector2<f64>]) -> Result<WarpSpec> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    if h_o.determinant().abs() <= MIN_DET {
        return Err(Error::SingularWarp);
    }
    if warped_region.is_empty() {
        return Err(Error::InvalidArgument("empty warped region".into()));
    }
    let (mut lo, mut hi) = (Vector2::repeat(f64::INFINITY), Vector2::repeat(f64::NEG_INFINITY));
    for p in warped_region {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let dv = hi.y - lo.y;
    let extent = (hi - lo) * scale;
    if !(extent.x <= CANVAS_CAP as f64 && extent.y <= CANVAS_CAP as f64) {
        return Err(Error::OversizedWarp {
            width: extent.x,
            height: extent.y,
            cap: CANVAS_CAP,
        });
    }
    let h_s = Matrix3::from_diagonal(&Vector3::new(scale, scale, 1.0));
    let mut translation = Matrix3::identity();
    translation[(0, 2)] = -lo.x * scale;
    translation[(1, 2)] = -lo.y * scale;
    Ok(WarpSpec {
        h_o: *h_o,
        h_s,
        translation,
        canvas_width: (extent.x.ceil() as u32).max(1),
        canvas_height: (extent.y.ceil() as u32).max(1),
        scale,
        dv,
        face_extent: [extent.x, extent.y],
    })
}

/// Everything needed to rasterize one face into its canonical view.
#[derive(Clone, Debug, PartialEq)]
pub struct RectifiedFace {
    pub frontalization: Frontalization,
    pub spec: WarpSpec,
    /// Face corners on the canvas, same order as [`CuboidFace::corners`].
    pub canvas_corners: [Vector2<f64>; 4],
}

/// Frontalize, measure, scale and compose for one face seen from `pose`.
pub fn rectify_face(
    k: &CameraIntrinsics,
    pose: &Pose,
    face: &CuboidFace,
    gravity_world: &Vector3<f64>,
) -> Result<RectifiedFace> {
    let normal = pose.rotation * face.normal;
    let gravity = pose.rotation * gravity_world;
    let object_dir = pose.to_camera(&face.centroid());
    let frontalization = frontalization_homography(k, &normal, &gravity, &object_dir)?;
    let h_o = frontalization.homography;
    let dv = measure_dv(&h_o, face, k, pose)?;
    let scale = scale_factor(k.fy, dv)?;
    let mut warped = [Vector2::zeros(); 4];
    for (w, c) in warped.iter_mut().zip(&face.corners) {
        *w = apply_homography(&h_o, &project(k, pose, c)?);
    }
    let spec = compose_warp(&h_o, scale, &warped)?;
    let full = spec.warp();
    let canvas_corners = warped.map(|_| Vector2::zeros());
    let mut canvas_corners = canvas_corners;
    for (out, c) in canvas_corners.iter_mut().zip(&face.corners) {
        *out = apply_homography(&full, &project(k, pose, c)?);
    }
    Ok(RectifiedFace {
        frontalization,
        spec,
        canvas_corners,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use rand::{Rng, SeedableRng};

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(1000.0, 1010.0, 640.0, 360.0, 1280, 720).unwrap()
    }

    #[test]
    fn frontal_plane_gives_identity() {
        let f = frontalization_homography(&k(), &Vector3::z(), &Vector3::y(), &Vector3::z()).unwrap();
        assert!((f.rotation - Matrix3::identity()).abs().max() < 1e-15);
        assert!((f.homography - Matrix3::identity()).abs().max() < 1e-12);
    }

    #[test]
    fn normal_maps_to_principal_point_and_gravity_to_vertical() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let k = k();
        for _ in 0..500 {
            // vertical face in a gravity-down world seen by a random camera
            let yaw: f64 = rng.random_range(-1.2..1.2);
            let n_world = Vector3::new(yaw.sin(), 0.0, -yaw.cos());
            let cam = Rotation3::from_euler_angles(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.3..0.3),
            );
            let n = cam * n_world;
            let g = cam * Vector3::y();
            let obj = cam * Vector3::new(rng.random_range(-0.3..0.3), 0.0, 1.0);
            let f = frontalization_homography(&k, &n, &g, &obj).unwrap();
            let r = f.rotation;
            assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-9);
            assert!((r.determinant() - 1.0).abs() < 1e-9);

            let hn = f.homography * (k.matrix() * n);
            let p = hn / hn.z;
            assert!(
                (p.x - k.cx).abs() < 1e-9 * k.cx && (p.y - k.cy).abs() < 1e-9 * k.cy,
                "{p:?}"
            );

            let hg = f.homography * (k.matrix() * g);
            let hg = hg / hg.norm();
            assert!(hg.z.abs() < 1e-9);
            assert!((hg - Vector3::y()).norm() < 1e-9, "{hg:?}");
        }
    }

    #[test]
    fn horizontal_face_is_degenerate() {
        let err = frontalization_homography(&k(), &Vector3::y(), &Vector3::y(), &Vector3::z());
        assert!(matches!(err, Err(Error::DegenerateOrientation { .. })));
    }

    #[test]
    fn scale_factor_contract() {
        assert_eq!(scale_factor(1000.0, 250.0).unwrap(), 4.0);
        assert_eq!(scale_factor(1000.0, 1000.0).unwrap(), 1.0);
        assert!(matches!(scale_factor(1000.0, 0.0), Err(Error::InvalidSpan(_))));
        assert!(scale_factor(1000.0, -3.0).is_err());
    }

    #[test]
    fn compose_identity_and_doubling() {
        let region = [Vector2::new(0.0, 0.0), Vector2::new(10.0, 20.0)];
        let spec = compose_warp(&Matrix3::identity(), 1.0, &region).unwrap();
        assert_eq!(spec.warp(), Matrix3::identity());
        assert_eq!((spec.canvas_width, spec.canvas_height), (10, 20));

        let region = [Vector2::new(3.0, 4.0), Vector2::new(13.0, 24.0)];
        let spec = compose_warp(&Matrix3::identity(), 2.0, &region).unwrap();
        let p = apply_homography(&(spec.h_s * spec.h_o), &Vector2::new(5.0, 7.0));
        assert_eq!(p, Vector2::new(10.0, 14.0));
        assert_eq!(
            apply_homography(&spec.warp(), &Vector2::new(3.0, 4.0)),
            Vector2::zeros()
        );
        assert_eq!((spec.canvas_width, spec.canvas_height), (20, 40));
    }

    #[test]
    fn rejects_oversized_canvas() {
        let region = [Vector2::new(0.0, 0.0), Vector2::new(100.0, 100.0)];
        assert!(matches!(
            compose_warp(&Matrix3::identity(), 100.0, &region),
            Err(Error::OversizedWarp { .. })
        ));
    }

    fn fronto_face(z: f64, h: f64, w: f64) -> CuboidFace {
        CuboidFace::new(
            Vector3::new(0.0, 0.0, -1.0),
            [
                Vector3::new(-w / 2.0, -h / 2.0, z),
                Vector3::new(w / 2.0, -h / 2.0, z),
                Vector3::new(w / 2.0, h / 2.0, z),
                Vector3::new(-w / 2.0, h / 2.0, z),
            ],
        )
        .unwrap()
    }

    #[test]
    fn dv_matches_pinhole_height() {
        let k = k();
        for (z, h) in [(4.0, 1.5), (2.0, 2.0), (7.5, 0.8)] {
            let face = fronto_face(z, h, 1.0);
            let dv = measure_dv(&Matrix3::identity(), &face, &k, &Pose::identity()).unwrap();
            assert!((dv - k.fy * h / z).abs() < 0.5, "dv {dv} vs {}", k.fy * h / z);
        }
        let face = fronto_face(2.0, 2.0, 1.0);
        let dv = measure_dv(&Matrix3::identity(), &face, &k, &Pose::identity()).unwrap();
        assert!((dv - k.fy).abs() < 1e-9);
    }

    #[test]
    fn oblique_face_scales_to_focal_length() {
        let k = k();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let yaw: f64 = rng.random_range(-1.0..1.0);
            let (w, h) = (rng.random_range(0.5..3.0), rng.random_range(0.5..2.5));
            let center = Vector3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.3..0.3),
                rng.random_range(3.0..8.0),
            );
            let right = Vector3::new(yaw.cos(), 0.0, yaw.sin());
            let down = Vector3::y();
            let corners = [
                center - right * w / 2.0 - down * h / 2.0,
                center + right * w / 2.0 - down * h / 2.0,
                center + right * w / 2.0 + down * h / 2.0,
                center - right * w / 2.0 + down * h / 2.0,
            ];
            let face = CuboidFace::new(down.cross(&right), corners).unwrap();
            let rect = rectify_face(&k, &Pose::identity(), &face, &Vector3::y()).unwrap();

            // independent point-by-point check of dv through the rotated camera
            let r = rect.frontalization.rotation;
            let project_rot = |x: &Vector3<f64>| {
                let p = r * x;
                k.fy * p.y / p.z + k.cy
            };
            let analytic = (project_rot(&corners[3]) - project_rot(&corners[0])).abs();
            assert!((rect.spec.dv - analytic).abs() < 0.5);

            let span = (rect.canvas_corners[3].y - rect.canvas_corners[0].y).abs();
            assert!((span - k.fy).abs() < 0.5, "span {span}");
            let span_right = (rect.canvas_corners[2].y - rect.canvas_corners[1].y).abs();
            assert!((span_right - k.fy).abs() < 1e-6);
            assert!(rect.canvas_corners[0].x < rect.canvas_corners[1].x);
        }
    }
}
