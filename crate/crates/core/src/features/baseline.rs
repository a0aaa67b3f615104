use image::RgbImage;

use super::FeatureExtractor;

/// Cells per side of the spatial grid.
pub const GRID: usize = 8;
pub const HUE_BINS: usize = 16;
pub const ORIENTATION_BINS: usize = 16;
const CELL_LEN: usize = HUE_BINS + ORIENTATION_BINS;
const NORM_EPS: f32 = 1e-12;

/// Spatial grid of hue and gradient-orientation histograms.
///
/// Each of the `8 x 8` cells holds a 16-bin hue histogram (pixel counts;
/// achromatic pixels vote for bin 0) and a 16-bin unsigned gradient
/// orientation histogram weighted by magnitude. Both histograms are
/// L2-normalized within the cell. Pixels whose center sits exactly on a cell
/// boundary split their vote between the two cells, which keeps the
/// descriptor exactly mirror-symmetric when the image side is not a multiple
/// of the grid. The cell vectors are concatenated row-major and
/// zero-padded or truncated to `dim`.
#[derive(Clone, Copy, Debug)]
pub struct BaselineExtractor {
    pub dim: usize,
}

impl Default for BaselineExtractor {
    fn default() -> Self {
        Self {
            dim: super::DEFAULT_DIM,
        }
    }
}

impl FeatureExtractor for BaselineExtractor {
    fn dim(&self) -> usize {
        self.dim
    }

    fn extract(&self, strip: &RgbImage) -> Vec<f32> {
        let mut cells = cell_histograms(strip);
        for cell in cells.chunks_mut(CELL_LEN) {
            let (hue, grad) = cell.split_at_mut(HUE_BINS);
            l2_normalize(hue);
            l2_normalize(grad);
        }
        cells.resize(self.dim, 0.0);
        cells
    }
}

fn l2_normalize(v: &mut [f32]) {
    let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    if n > NORM_EPS {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Hue bin in `[0, HUE_BINS)`; gray pixels map to bin 0.
fn hue_bin(r: u8, g: u8, b: u8) -> usize {
    let (r, g, b) = (r as f32, g as f32, b as f32);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let c = max - min;
    if c == 0.0 {
        return 0;
    }
    let h = if max == r {
        ((g - b) / c).rem_euclid(6.0)
    } else if max == g {
        (b - r) / c + 2.0
    } else {
        (r - g) / c + 4.0
    };
    ((h / 6.0 * HUE_BINS as f32) as usize).min(HUE_BINS - 1)
}

/// Orientation bin for an unsigned gradient direction. Bins are centered
/// on multiples of `pi / ORIENTATION_BINS`, so mirroring `theta -> pi - theta`
/// maps bin `b` to `(ORIENTATION_BINS - b) % ORIENTATION_BINS`.
fn orientation_bin(gx: f32, gy: f32) -> usize {
    let mut theta = gy.atan2(gx);
    if theta < 0.0 {
        theta += std::f32::consts::PI;
    }
    let b = (theta / std::f32::consts::PI * ORIENTATION_BINS as f32 + 0.5).floor() as usize;
    b % ORIENTATION_BINS
}

/// Cells touched by pixel `i` along an axis of length `len`, with weights.
fn cell_weights(i: usize, len: usize) -> [(usize, f32); 2] {
    let twice = (2 * i + 1) * GRID;
    let cell = twice / (2 * len);
    if twice % (2 * len) == 0 && cell > 0 && cell < GRID {
        [(cell - 1, 0.5), (cell, 0.5)]
    } else {
        [(cell.min(GRID - 1), 1.0), (0, 0.0)]
    }
}

fn cell_histograms(img: &RgbImage) -> Vec<f32> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut out = vec![0.0f32; GRID * GRID * CELL_LEN];
    if w == 0 || h == 0 {
        return out;
    }
    let raw = img.as_raw();
    let lum: Vec<f32> = raw
        .chunks_exact(3)
        .map(|p| (p[0] as f32 + p[1] as f32 + p[2] as f32) / 3.0)
        .collect();
    let at = |x: usize, y: usize| lum[y * w + x];
    let xw: Vec<_> = (0..w).map(|x| cell_weights(x, w)).collect();
    for y in 0..h {
        let yw = cell_weights(y, h);
        let (ym, yp) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (xm, xp) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let gx = at(xp, y) - at(xm, y);
            let gy = at(x, yp) - at(x, ym);
            let mag = (gx * gx + gy * gy).sqrt();
            let p = &raw[(y * w + x) * 3..(y * w + x) * 3 + 3];
            let hb = hue_bin(p[0], p[1], p[2]);
            let ob = if mag > 0.0 { Some(orientation_bin(gx, gy)) } else { None };
            for &(cy, wy) in &yw {
                if wy == 0.0 {
                    continue;
                }
                for &(cx, wx) in &xw[x] {
                    if wx == 0.0 {
                        continue;
                    }
                    let weight = wx * wy;
                    let base = (cy * GRID + cx) * CELL_LEN;
                    out[base + hb] += weight;
                    if let Some(ob) = ob {
                        out[base + HUE_BINS + ob] += weight * mag;
                    }
                }
            }
        }
    }
    out
}
