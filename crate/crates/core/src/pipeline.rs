//! Batch steps behind the command-line tools: warp labeled faces out of a
//! reconstruction bundle, cut the canonical views into strips, and describe
//! the strips.
//!
//! Every step is a pure function of its inputs. Work is spread over rayon
//! but results are collected in input order and ids are assigned
//! afterwards, so repeated runs write identical files.

use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use nalgebra::{Matrix3, Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::{Face, LabelExport};
use crate::features::{EcofFile, FeatureExtractor};
use crate::geometry::{Bundle, DEPTH_EPS};
use crate::rectification::{apply_homography, rectify_face, warp_image, CuboidFace};
use crate::strips::{
    channel_means, extract_strips, normalize_strip, strip_geometry, PixelRect, StripManifest, StripRecord,
};
use crate::{Error, Result};

/// Faces whose left edge spans fewer pixels than this are not warped.
pub const MIN_FACE_SPAN_PX: f64 = 8.0;

/// Strips whose footprint was less than this fraction inside the source frame are dropped.
pub const MIN_STRIP_COVERAGE: f64 = 0.5;

const COVERAGE_GRID: usize = 16;

/// One frontalized face on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpRecord {
    pub frame: String,
    pub box_id: u64,
    pub category: String,
    pub face: Face,
    /// PNG path relative to the warp manifest.
    pub image: String,
    pub canvas: [u32; 2],
    /// Full warp `T H_s H_O`, row-major.
    pub warp: [f64; 9],
    pub scale: f64,
    /// Face corners on the canvas (top-left, top-right, bottom-right, bottom-left).
    pub canvas_corners: [[f64; 2]; 4],
    /// Face corners in the world, same order.
    pub world_corners: [[f64; 3]; 4],
    pub normal: [f64; 3],
    pub camera_center: [f64; 3],
}

impl WarpRecord {
    pub fn face(&self) -> Result<CuboidFace> {
        CuboidFace::new(Vector3::from(self.normal), self.world_corners.map(Vector3::from))
    }

    pub fn warp_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_row_slice(&self.warp)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedFace {
    pub frame: String,
    pub box_id: u64,
    pub face: Face,
    pub reason: String,
}

/// `warps.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpManifest {
    pub store: String,
    /// Source frame size, needed to tell which canvas pixels saw the image.
    pub image_size: [u32; 2],
    pub faces: Vec<WarpRecord>,
    pub skipped: Vec<SkippedFace>,
}

impl WarpManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("warp manifest: {e}")))
    }
}

fn face_slug(face: Face) -> &'static str {
    match face {
        Face::NegX => "nx",
        Face::PosX => "px",
        Face::NegY => "ny",
        Face::PosY => "py",
        Face::NegZ => "nz",
        Face::PosZ => "pz",
    }
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    Ok(image::open(path)?.to_rgb8())
}

pub fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

enum Outcome {
    Warped(WarpRecord, RgbImage),
    Skipped(SkippedFace),
}

fn warp_frame(bundle: &Bundle, frame_index: usize, labels: &LabelExport, image: &RgbImage) -> Result<Vec<Outcome>> {
    let k = &bundle.intrinsics;
    let f = &bundle.frames[frame_index];
    let pose = f.pose();
    let mut out = Vec::new();
    for record in &labels.boxes {
        let cuboid = record.to_cuboid()?;
        for face in Face::VERTICAL {
            let cf = cuboid.face(face);
            let facing = cf.normal.dot(&(pose.center - cf.corners[0])) > DEPTH_EPS;
            let in_front = cf.corners.iter().all(|c| pose.to_camera(c).z > DEPTH_EPS);
            if !facing || !in_front {
                continue;
            }
            let skip = |reason: String| {
                Outcome::Skipped(SkippedFace {
                    frame: f.id.clone(),
                    box_id: record.id,
                    face,
                    reason,
                })
            };
            let rect = match rectify_face(k, &pose, &cf, &cuboid.axes.gravity) {
                Ok(r) => r,
                Err(e) => {
                    out.push(skip(e.to_string()));
                    continue;
                }
            };
            if rect.spec.dv < MIN_FACE_SPAN_PX {
                out.push(skip(format!("face spans {:.1} px", rect.spec.dv)));
                continue;
            }
            let warp = rect.spec.warp();
            let (w, h) = (rect.spec.canvas_width, rect.spec.canvas_height);
            let pixels = warp_image(image, &warp, w, h)?;
            let mut row_major = [0.0; 9];
            for r in 0..3 {
                for c in 0..3 {
                    row_major[3 * r + c] = warp[(r, c)];
                }
            }
            out.push(Outcome::Warped(
                WarpRecord {
                    frame: f.id.clone(),
                    box_id: record.id,
                    category: cuboid.category.clone(),
                    face,
                    image: format!("warped/{}-{}-{}.png", slug(&f.id), record.id, face_slug(face)),
                    canvas: [w, h],
                    warp: row_major,
                    scale: rect.spec.scale,
                    canvas_corners: rect.canvas_corners.map(|p| [p.x, p.y]),
                    world_corners: cf.corners.map(|c| [c.x, c.y, c.z]),
                    normal: [cf.normal.x, cf.normal.y, cf.normal.z],
                    camera_center: [pose.center.x, pose.center.y, pose.center.z],
                },
                pixels,
            ));
        }
    }
    Ok(out)
}

/// Frontalize and scale every vertical box face visible in every frame and
/// write the canonical views under `out_dir/warped/`. Faces that cannot be
/// rectified (degenerate orientation, oversized canvas, tiny span) are
/// listed as skipped.
pub fn warp_bundle(bundle: &Bundle, labels: &LabelExport, store: &str, out_dir: &Path) -> Result<WarpManifest> {
    let per_frame: Vec<Vec<Outcome>> = (0..bundle.frames.len())
        .into_par_iter()
        .map(|i| {
            let image = load_rgb(&bundle.image_path(&bundle.frames[i]))?;
            warp_frame(bundle, i, labels, &image)
        })
        .collect::<Result<_>>()?;
    let mut faces = Vec::new();
    let mut skipped = Vec::new();
    let mut images = Vec::new();
    for o in per_frame.into_iter().flatten() {
        match o {
            Outcome::Warped(r, img) => {
                images.push((out_dir.join(&r.image), img));
                faces.push(r);
            }
            Outcome::Skipped(s) => skipped.push(s),
        }
    }
    images
        .par_iter()
        .map(|(p, img)| save_png(img, p))
        .collect::<Result<()>>()?;
    Ok(WarpManifest {
        store: store.to_string(),
        image_size: [bundle.intrinsics.width, bundle.intrinsics.height],
        faces,
        skipped,
    })
}

/// Face extent on the canvas as `(left, right, top, bottom)`.
fn canvas_extent(r: &WarpRecord) -> (f64, f64, f64, f64) {
    let xs = r.canvas_corners.map(|c| c[0]);
    let ys = r.canvas_corners.map(|c| c[1]);
    let min = |v: [f64; 4]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: [f64; 4]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min(xs), max(xs), min(ys), max(ys))
}

/// Fraction of the canvas rectangle `[x0, x1] x [y0, y1]` that maps inside
/// the source frame, sampled on a regular grid of cell centres.
fn source_coverage(inverse: &Matrix3<f64>, x0: f64, x1: f64, y0: f64, y1: f64, size: [u32; 2]) -> f64 {
    let n = COVERAGE_GRID;
    let mut inside = 0;
    for i in 0..n {
        for j in 0..n {
            let x = x0 + (x1 - x0) * (i as f64 + 0.5) / n as f64;
            let y = y0 + (y1 - y0) * (j as f64 + 0.5) / n as f64;
            let p = apply_homography(inverse, &Vector2::new(x, y));
            if p.x >= -0.5 && p.y >= -0.5 && p.x <= size[0] as f64 - 0.5 && p.y <= size[1] as f64 - 0.5 {
                inside += 1;
            }
        }
    }
    inside as f64 / (n * n) as f64
}

struct CutStrip {
    record: StripRecord,
    image: RgbImage,
}

fn cut_face(manifest: &WarpManifest, r: &WarpRecord, warp_dir: &Path, strip_width: u32) -> Result<Vec<CutStrip>> {
    let img = load_rgb(&warp_dir.join(&r.image))?;
    let face = r.face()?;
    let inverse = r.warp_matrix().try_inverse().ok_or(Error::SingularWarp)?;
    let (left, right, top, bottom) = canvas_extent(r);
    let x0 = left.max(0.0).ceil() as u32;
    let x1 = (right.min(img.width() as f64).floor() as u32).max(x0);
    let y0 = top.max(0.0).round() as u32;
    let y1 = (bottom.round() as u32).clamp(y0, img.height());
    let rect = PixelRect {
        x: x0,
        y: y0,
        width: x1 - x0,
        height: y1 - y0,
    };
    if rect.height == 0 {
        return Ok(Vec::new());
    }
    let span = right - left;
    let mut out = Vec::new();
    for raw in extract_strips(&img, rect, strip_width)? {
        let sx0 = raw.x_offset as f64 - 0.5;
        let sx1 = (raw.x_offset + strip_width) as f64 - 0.5;
        let (sy0, sy1) = (rect.y as f64 - 0.5, (rect.y + rect.height) as f64 - 0.5);
        if source_coverage(&inverse, sx0, sx1, sy0, sy1, manifest.image_size) < MIN_STRIP_COVERAGE {
            continue;
        }
        let along0 = (sx0 - left) / span;
        let along1 = (sx1 - left) / span;
        let geometry = strip_geometry(&face, &Vector3::from(r.camera_center), along0, along1);
        let image = normalize_strip(&raw.image)?;
        let path = format!(
            "strips/{}/{}/{}-{}_{}.png",
            slug(&manifest.store),
            slug(&r.category),
            slug(&r.frame),
            r.box_id,
            format_args!("{}{}", face_slug(r.face), raw.index)
        );
        out.push(CutStrip {
            record: StripRecord {
                id: 0,
                path,
                store: manifest.store.clone(),
                frame: r.frame.clone(),
                box_id: r.box_id,
                category: r.category.clone(),
                index: raw.index,
                world_width: geometry.world_width,
                distance: geometry.distance,
            },
            image,
        });
    }
    Ok(out)
}

/// Cut every warped face into `strip_width`-wide strips, keep the strips
/// mostly seen by the source frame, normalize them onto
/// the square canvas and write them under `out_dir/strips/`. Ids are
/// assigned in manifest order.
pub fn cut_strips(manifest: &WarpManifest, warp_dir: &Path, strip_width: u32, out_dir: &Path) -> Result<StripManifest> {
    if strip_width == 0 {
        return Err(Error::InvalidArgument("strip width must be at least 1".into()));
    }
    let per_face: Vec<Vec<CutStrip>> = manifest
        .faces
        .par_iter()
        .map(|r| cut_face(manifest, r, warp_dir, strip_width))
        .collect::<Result<_>>()?;
    let mut strips: Vec<CutStrip> = per_face.into_iter().flatten().collect();
    for (i, s) in strips.iter_mut().enumerate() {
        s.record.id = i as u64;
    }
    strips
        .par_iter()
        .map(|s| save_png(&s.image, &out_dir.join(&s.record.path)))
        .collect::<Result<()>>()?;
    Ok(StripManifest {
        strip_width,
        channel_means: channel_means(strips.iter().map(|s| &s.image)),
        strips: strips.into_iter().map(|s| s.record).collect(),
    })
}

/// Describe every strip of a manifest rooted at `dir`.
pub fn extract_features(manifest: &StripManifest, dir: &Path, extractor: &dyn FeatureExtractor) -> Result<EcofFile> {
    let records = manifest
        .strips
        .par_iter()
        .map(|s| {
            let img = load_rgb(&dir.join(&s.path))?;
            Ok((s.id, extractor.extract(&img)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EcofFile {
        dim: extractor.dim(),
        records,
    })
}

/// Path of `rel` resolved against the directory holding `manifest`.
pub fn resolve(manifest: &Path, rel: &str) -> PathBuf {
    manifest.parent().unwrap_or(Path::new(".")).join(rel)
}
