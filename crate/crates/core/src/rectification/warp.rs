use image::{Rgb, RgbImage};
use nalgebra::{Matrix3, Vector2, Vector3};
use rayon::prelude::*;

use crate::{Error, Result};

const MIN_DET: f64 = 1e-12;

/// Map a pixel through a homography (dehomogenized).
pub fn apply_homography(h: &Matrix3<f64>, p: &Vector2<f64>) -> Vector2<f64> {
    let q = h * Vector3::new(p.x, p.y, 1.0);
    Vector2::new(q.x / q.z, q.y / q.z)
}

/// Inverse-mapped bilinear resampling of `src` through `warp` onto a
/// `width x height` canvas. Canvas pixels whose preimage falls outside the
/// source are black.
pub fn warp_image(src: &RgbImage, warp: &Matrix3<f64>, width: u32, height: u32) -> Result<RgbImage> {
    if !(warp.determinant().abs() > MIN_DET) {
        return Err(Error::SingularWarp);
    }
    let inv = warp.try_inverse().ok_or(Error::SingularWarp)?;
    let mut out = RgbImage::new(width, height);
    if width == 0 || height == 0 {
        return Ok(out);
    }
    let row_len = width as usize * 3;
    out.par_chunks_mut(row_len).enumerate().for_each(|(y, row)| {
        for x in 0..width as usize {
            let q = inv * Vector3::new(x as f64, y as f64, 1.0);
            if q.z <= 0.0 {
                continue;
            }
            if let Some(px) = sample_bilinear(src, q.x / q.z, q.y / q.z) {
                row[x * 3..x * 3 + 3].copy_from_slice(&px.0);
            }
        }
    });
    Ok(out)
}

fn sample_bilinear(src: &RgbImage, x: f64, y: f64) -> Option<Rgb<u8>> {
    let (w, h) = (src.width() as i64, src.height() as i64);
    if !(x >= -0.5 && y >= -0.5 && x < w as f64 - 0.5 && y < h as f64 - 0.5) {
        return None;
    }
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let at = |xx: i64, yy: i64| src.get_pixel(xx.clamp(0, w - 1) as u32, yy.clamp(0, h - 1) as u32).0;
    let p00 = at(x0, y0);
    let p10 = at(x0 + 1, y0);
    let p01 = at(x0, y0 + 1);
    let p11 = at(x0 + 1, y0 + 1);
    let mut out = [0u8; 3];
    for c in 0..3 {
        let top = p00[c] as f64 + fx * (p10[c] as f64 - p00[c] as f64);
        let bottom = p01[c] as f64 + fx * (p11[c] as f64 - p01[c] as f64);
        let v = top + fy * (bottom - top);
        out[c] = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
    }
    Some(Rgb(out))
}
