//! Object-centric rectification.
//!
//! A face of an annotated cuboid is re-rendered fronto-parallel with gravity
//! pointing down the image (`H_O = K R_O K^-1`), then scaled so that its
//! vertical extent spans exactly `f_y` pixels (`H_s = diag(s, s, 1)` with
//! `s = f_y / dv`), then translated onto a raster canvas.

mod face;
mod homography;
mod warp;

pub use face::CuboidFace;
pub use homography::{
    compose_warp, frontalization_homography, measure_dv, rectify_face, scale_factor, Frontalization, RectifiedFace,
    WarpSpec, CANVAS_CAP, MIN_NORMAL_GRAVITY_DEG,
};
pub use warp::{apply_homography, warp_image};

pub(crate) mod row_major {
    use nalgebra::Matrix3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix3<f64>, s: S) -> Result<S::Ok, S::Error> {
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 3 + c] = m[(r, c)];
            }
        }
        out.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix3<f64>, D::Error> {
        let v = <[f64; 9]>::deserialize(d)?;
        Ok(Matrix3::from_row_slice(&v))
    }
}
