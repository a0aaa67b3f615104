//! Uniform-width vertical strips from rectified face views.

use image::imageops::{self, FilterType};
use image::RgbImage;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::rectification::CuboidFace;
use crate::{Error, Result};

pub const DEFAULT_STRIP_WIDTH: u32 = 100;
/// Side of the square canvas every strip is centered on.
pub const CANVAS_SIZE: u32 = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Debug)]
pub struct RawStrip {
    /// Left-to-right ordinal of the strip within the face.
    pub index: usize,
    /// Column of the strip's left edge in the rectified image.
    pub x_offset: u32,
    pub image: RgbImage,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StripSource {
    pub store: String,
    pub frame: String,
    pub category: String,
    pub index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripGeometry {
    /// Physical width of the strip on the face.
    pub world_width: f64,
    /// Camera center to the strip's 3D centroid.
    pub distance: f64,
}

/// One strip on disk, as listed in the strip manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripRecord {
    pub id: u64,
    /// PNG path relative to the manifest.
    pub path: String,
    pub store: String,
    pub frame: String,
    pub box_id: u64,
    pub category: String,
    /// Left-to-right ordinal within its face.
    pub index: usize,
    pub world_width: f64,
    pub distance: f64,
}

/// `strips.json`: every normalized strip of a run plus the corpus channel means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripManifest {
    pub strip_width: u32,
    pub channel_means: [f32; 3],
    pub strips: Vec<StripRecord>,
}

impl StripManifest {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("strip manifest: {e}")))
    }
}

#[derive(Clone, Debug)]
pub struct Strip {
    pub pixels: RgbImage,
    pub source: StripSource,
    pub geometry: StripGeometry,
}

/// Cut `rect` into `floor(rect.width / strip_width)` full-height strips.
/// The sliver left over on the right is dropped.
pub fn extract_strips(image: &RgbImage, rect: PixelRect, strip_width: u32) -> Result<Vec<RawStrip>> {
    if strip_width == 0 {
        return Err(Error::InvalidArgument("strip width must be at least 1".into()));
    }
    if rect.x + rect.width > image.width() || rect.y + rect.height > image.height() {
        return Err(Error::InvalidArgument(format!(
            "rect {rect:?} exceeds {}x{} image",
            image.width(),
            image.height()
        )));
    }
    let count = rect.width / strip_width;
    Ok((0..count)
        .map(|i| {
            let x = rect.x + i * strip_width;
            RawStrip {
                index: i as usize,
                x_offset: x,
                image: imageops::crop_imm(image, x, rect.y, strip_width, rect.height).to_image(),
            }
        })
        .collect())
}

/// Resize to the canvas height keeping aspect ratio, then center on a black
/// square canvas.
pub fn normalize_strip(raw: &RgbImage) -> Result<RgbImage> {
    let (w, h) = raw.dimensions();
    if h == 0 || w == 0 {
        return Err(Error::InvalidArgument("empty strip".into()));
    }
    let new_w = ((w as u64 * CANVAS_SIZE as u64 + h as u64 / 2) / h as u64).max(1) as u32;
    if new_w > CANVAS_SIZE {
        return Err(Error::StripTooWide(new_w));
    }
    let resized = if (new_w, CANVAS_SIZE) == (w, h) {
        raw.clone()
    } else {
        imageops::resize(raw, new_w, CANVAS_SIZE, FilterType::Triangle)
    };
    let mut canvas = RgbImage::new(CANVAS_SIZE, CANVAS_SIZE);
    imageops::replace(&mut canvas, &resized, ((CANVAS_SIZE - new_w) / 2) as i64, 0);
    Ok(canvas)
}

/// Horizontal offset at which a strip of `raw_width x raw_height` lands on
/// the canvas.
pub fn canvas_offset(raw_width: u32, raw_height: u32) -> u32 {
    let new_w = ((raw_width as u64 * CANVAS_SIZE as u64 + raw_height as u64 / 2) / raw_height as u64) as u32;
    (CANVAS_SIZE.saturating_sub(new_w)) / 2
}

/// Mean-subtracted pixels, row-major `height x width x 3`.
#[derive(Clone, Debug, PartialEq)]
pub struct StripTensor {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

pub fn preprocess(strip: &RgbImage, channel_means: [f32; 3]) -> StripTensor {
    let data = strip
        .pixels()
        .flat_map(|p| {
            let [r, g, b] = p.0;
            [
                r as f32 - channel_means[0],
                g as f32 - channel_means[1],
                b as f32 - channel_means[2],
            ]
        })
        .collect();
    StripTensor {
        width: strip.width(),
        height: strip.height(),
        data,
    }
}

/// Per-channel pixel mean over a set of strips.
pub fn channel_means<'a>(strips: impl IntoIterator<Item = &'a RgbImage>) -> [f32; 3] {
    let mut sums = [0u64; 3];
    let mut count = 0u64;
    for img in strips {
        for p in img.pixels() {
            for c in 0..3 {
                sums[c] += p.0[c] as u64;
            }
        }
        count += img.width() as u64 * img.height() as u64;
    }
    if count == 0 {
        return [0.0; 3];
    }
    sums.map(|s| (s as f64 / count as f64) as f32)
}

/// Geometry of the strip covering `[along_start, along_end]` (fractions of the
/// face width, left to right) as seen from `camera_center`.
pub fn strip_geometry(
    face: &CuboidFace,
    camera_center: &Vector3<f64>,
    along_start: f64,
    along_end: f64,
) -> StripGeometry {
    let mid = 0.5 * (along_start + along_end);
    let centroid = face.point_at(mid, 0.5);
    StripGeometry {
        world_width: face.width() * (along_end - along_start),
        distance: (centroid - camera_center).norm(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;
    use proptest::prelude::*;

    fn pattern(w: u32, h: u32) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| {
            Rgb([(x % 251) as u8, (y % 241) as u8, ((x * 7 + y * 3) % 256) as u8])
        })
    }

    #[test]
    fn floor_count_and_discarded_remainder() {
        let img = pattern(512, 40);
        let strips = extract_strips(
            &img,
            PixelRect {
                x: 0,
                y: 0,
                width: 512,
                height: 40,
            },
            DEFAULT_STRIP_WIDTH,
        )
        .unwrap();
        assert_eq!(strips.len(), 5);
        assert_eq!(strips.last().unwrap().x_offset + 100, 500);
        let narrow = extract_strips(
            &img,
            PixelRect {
                x: 0,
                y: 0,
                width: 99,
                height: 40,
            },
            100,
        )
        .unwrap();
        assert!(narrow.is_empty());
    }

    #[test]
    fn zero_width_is_an_error() {
        let img = pattern(10, 10);
        assert!(extract_strips(
            &img,
            PixelRect {
                x: 0,
                y: 0,
                width: 10,
                height: 10
            },
            0
        )
        .is_err());
    }

    #[test]
    fn normalization_offsets() {
        for (w, h, offset, new_w) in [(100, 1000, 225, 50), (100, 500, 200, 100), (120, 1000, 220, 60)] {
            let raw = RgbImage::from_pixel(w, h, Rgb([200, 100, 50]));
            let out = normalize_strip(&raw).unwrap();
            assert_eq!(out.dimensions(), (CANVAS_SIZE, CANVAS_SIZE));
            assert_eq!(canvas_offset(w, h), offset);
            assert_eq!(*out.get_pixel(offset - 1, 250), Rgb([0, 0, 0]));
            assert_eq!(*out.get_pixel(offset, 250), Rgb([200, 100, 50]));
            assert_eq!(*out.get_pixel(offset + new_w - 1, 250), Rgb([200, 100, 50]));
            assert_eq!(*out.get_pixel(offset + new_w, 250), Rgb([0, 0, 0]));
        }
    }

    #[test]
    fn too_wide_strip_is_rejected() {
        let raw = RgbImage::new(300, 200);
        assert!(matches!(normalize_strip(&raw), Err(Error::StripTooWide(750))));
    }

    #[test]
    fn normalization_is_idempotent_on_centered_canvas() {
        let raw = pattern(100, 800);
        let once = normalize_strip(&raw).unwrap();
        let twice = normalize_strip(&once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn preprocess_subtracts_means() {
        let img = RgbImage::from_pixel(3, 2, Rgb([10, 20, 30]));
        let t = preprocess(&img, [10.0, 20.0, 30.0]);
        assert!(t.data.iter().all(|&v| v == 0.0));
        let t = preprocess(&img, [0.0; 3]);
        assert_eq!(&t.data[..3], &[10.0, 20.0, 30.0]);
    }

    #[test]
    fn corpus_means_center_the_corpus() {
        let corpus: Vec<RgbImage> = (0..6).map(|i| pattern(20 + i, 30 + 2 * i)).collect();
        let means = channel_means(&corpus);
        // two-pass recomputation over the preprocessed corpus
        let mut sums = [0f64; 3];
        let mut n = 0f64;
        for img in &corpus {
            let t = preprocess(img, means);
            for px in t.data.chunks(3) {
                for c in 0..3 {
                    sums[c] += px[c] as f64;
                }
                n += 1.0;
            }
        }
        for s in sums {
            assert!((s / n).abs() < 1e-3, "{}", s / n);
        }
    }

    proptest! {
        #[test]
        fn strips_tile_the_crop(width in 1u32..300, height in 1u32..20, sw in 1u32..120, x in 0u32..20) {
            let img = pattern(width + x + 5, height + 3);
            let rect = PixelRect { x, y: 2, width, height };
            let strips = extract_strips(&img, rect, sw).unwrap();
            prop_assert_eq!(strips.len() as u32, width / sw);
            let covered = strips.len() as u32 * sw;
            for (i, s) in strips.iter().enumerate() {
                prop_assert_eq!(s.index, i);
                prop_assert_eq!(s.image.dimensions(), (sw, height));
            }
            for yy in 0..height {
                for xx in 0..covered {
                    let s = &strips[(xx / sw) as usize];
                    prop_assert_eq!(s.image.get_pixel(xx % sw, yy), img.get_pixel(x + xx, 2 + yy));
                }
            }
        }
    }
}
