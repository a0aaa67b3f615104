use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scene::{SyntheticBox, SyntheticScene};
use crate::annotation::Face;
use crate::geometry::{BundleFrame, CameraIntrinsics, Pose};

const MIN_DEPTH: f64 = 1e-9;

/// Pinhole camera on plain arrays: `u = fx * X_c / Z_c + cx` with
/// `X_c = R (X - C)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub r: [[f64; 3]; 3],
    pub c: [f64; 3],
}

impl ScalarCamera {
    pub fn new(k: &CameraIntrinsics, pose: &Pose) -> Self {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = pose.rotation[(i, j)];
            }
        }
        Self {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
            r,
            c: [pose.center.x, pose.center.y, pose.center.z],
        }
    }

    pub fn to_camera(&self, x: [f64; 3]) -> [f64; 3] {
        let d = [x[0] - self.c[0], x[1] - self.c[1], x[2] - self.c[2]];
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = self.r[i][0] * d[0] + self.r[i][1] * d[1] + self.r[i][2] * d[2];
        }
        out
    }

    pub fn project(&self, x: [f64; 3]) -> Option<[f64; 2]> {
        let p = self.to_camera(x);
        if p[2] <= MIN_DEPTH {
            return None;
        }
        Some([self.fx * p[0] / p[2] + self.cx, self.fy * p[1] / p[2] + self.cy])
    }

    /// World-frame direction of the ray through pixel `(u, v)`.
    pub fn ray(&self, u: f64, v: f64) -> [f64; 3] {
        let q = [(u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0];
        let mut out = [0.0; 3];
        for j in 0..3 {
            out[j] = self.r[0][j] * q[0] + self.r[1][j] * q[1] + self.r[2][j] * q[2];
        }
        out
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn arr(v: &nalgebra::Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

struct PaintFace<'a> {
    origin: [f64; 3],
    right: [f64; 3],
    down: [f64; 3],
    normal: [f64; 3],
    width: f64,
    height: f64,
    texture: &'a super::Texture,
    /// Inclusive pixel bounds `(x0, y0, x1, y1)`.
    bounds: (i64, i64, i64, i64),
}

fn faces_to_paint<'a>(cam: &ScalarCamera, boxes: &'a [SyntheticBox]) -> Vec<PaintFace<'a>> {
    let mut faces = Vec::new();
    for (bi, b) in boxes.iter().enumerate() {
        for face in Face::ALL {
            let f = b.cuboid.face(face);
            let corners = f.corners.map(|c| arr(&c));
            let normal = arr(&f.normal);
            if dot(normal, sub(cam.c, corners[0])) <= 0.0 {
                continue;
            }
            let width = (f.corners[1] - f.corners[0]).norm();
            let height = (f.corners[3] - f.corners[0]).norm();
            let right = arr(&((f.corners[1] - f.corners[0]) / width));
            let down = arr(&((f.corners[3] - f.corners[0]) / height));
            let projected: Vec<_> = corners.iter().filter_map(|c| cam.project(*c)).collect();
            let full = (0, 0, cam.width as i64 - 1, cam.height as i64 - 1);
            let bounds = if projected.len() == 4 {
                let (mut x0, mut y0, mut x1, mut y1) =
                    (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
                for p in &projected {
                    x0 = x0.min(p[0]);
                    y0 = y0.min(p[1]);
                    x1 = x1.max(p[0]);
                    y1 = y1.max(p[1]);
                }
                (
                    (x0.floor() as i64 - 1).max(full.0),
                    (y0.floor() as i64 - 1).max(full.1),
                    (x1.ceil() as i64 + 1).min(full.2),
                    (y1.ceil() as i64 + 1).min(full.3),
                )
            } else {
                full
            };
            if bounds.0 > bounds.2 || bounds.1 > bounds.3 {
                continue;
            }
            let centroid = arr(&f.centroid());
            let dist = dot(sub(centroid, cam.c), sub(centroid, cam.c)).sqrt();
            faces.push((
                dist,
                bi,
                face.index(),
                PaintFace {
                    origin: corners[0],
                    right,
                    down,
                    normal,
                    width,
                    height,
                    texture: &b.texture,
                    bounds,
                },
            ));
        }
    }
    // painter's order: far to near
    faces.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    faces.into_iter().map(|f| f.3).collect()
}

/// Render textured boxes from one camera. Nearest-sample, black background.
pub fn render_view(cam: &ScalarCamera, boxes: &[SyntheticBox], tint: [f64; 3]) -> RgbImage {
    let faces = faces_to_paint(cam, boxes);
    let mut img = RgbImage::new(cam.width, cam.height);
    let row_len = cam.width as usize * 3;
    img.par_chunks_mut(row_len).enumerate().for_each(|(y, row)| {
        let y = y as i64;
        for face in &faces {
            if y < face.bounds.1 || y > face.bounds.3 {
                continue;
            }
            for x in face.bounds.0..=face.bounds.2 {
                let d = cam.ray(x as f64, y as f64);
                let denom = dot(face.normal, d);
                if denom.abs() < 1e-15 {
                    continue;
                }
                let t = dot(face.normal, sub(face.origin, cam.c)) / denom;
                if t <= 0.0 {
                    continue;
                }
                let hit = [cam.c[0] + t * d[0], cam.c[1] + t * d[1], cam.c[2] + t * d[2]];
                let rel = sub(hit, face.origin);
                let s = dot(rel, face.right);
                let q = dot(rel, face.down);
                if s < 0.0 || s >= face.width || q < 0.0 || q >= face.height {
                    continue;
                }
                let color = face.texture.sample(s, q);
                let px = &mut row[x as usize * 3..x as usize * 3 + 3];
                for c in 0..3 {
                    px[c] = (color[c] as f64 * tint[c]).round().clamp(0.0, 255.0) as u8;
                }
            }
        }
    });
    img
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceTruth {
    pub box_index: usize,
    pub face: Face,
    /// Outward normal, world frame.
    pub normal: [f64; 3],
    /// Camera-frame depth of the face centroid.
    pub depth: f64,
    /// Euclidean distance from the camera center to the face centroid.
    pub distance: f64,
    /// Corner pixels (top-left, top-right, bottom-right, bottom-left).
    pub corners: [[f64; 2]; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameTruth {
    pub frame: String,
    pub gravity: [f64; 3],
    /// Faces turned toward the camera with all corners in front of it.
    pub faces: Vec<FaceTruth>,
}

#[derive(Clone, Debug)]
pub struct RenderedFrame {
    pub image: RgbImage,
    pub frame: BundleFrame,
    pub truth: FrameTruth,
}

pub fn frame_id(index: usize) -> String {
    format!("{index:04}")
}

/// Render frame `index` of the trajectory with its bundle entry and ground truth.
pub fn render_frame(scene: &SyntheticScene, index: usize) -> RenderedFrame {
    let pose = &scene.poses[index];
    let cam = ScalarCamera::new(&scene.intrinsics, pose);
    let image = render_view(&cam, &scene.boxes, scene.tint);
    let id = frame_id(index);
    let frame = BundleFrame::from_pose(id.clone(), format!("frames/{id}.png"), pose);

    let mut faces = Vec::new();
    for (bi, b) in scene.boxes.iter().enumerate() {
        for face in Face::ALL {
            let f = b.cuboid.face(face);
            let normal = arr(&f.normal);
            if dot(normal, sub(cam.c, arr(&f.corners[0]))) <= 0.0 {
                continue;
            }
            let px: Vec<[f64; 2]> = f.corners.iter().filter_map(|c| cam.project(arr(c))).collect();
            if px.len() != 4 {
                continue;
            }
            let centroid = arr(&f.centroid());
            faces.push(FaceTruth {
                box_index: bi,
                face,
                normal,
                depth: cam.to_camera(centroid)[2],
                distance: dot(sub(centroid, cam.c), sub(centroid, cam.c)).sqrt(),
                corners: [px[0], px[1], px[2], px[3]],
            });
        }
    }
    RenderedFrame {
        image,
        frame,
        truth: FrameTruth {
            frame: id,
            gravity: arr(&scene.axes.gravity),
            faces,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::super::{generate, Preset, SceneOptions, Texture};
    use super::*;
    use crate::annotation::Cuboid;
    use crate::geometry::SceneAxes;
    use nalgebra::{Matrix3, Vector3};

    fn fronto_box(z: f64, h: f64, texture: Texture) -> SyntheticBox {
        // x right, y down (gravity), front face at camera depth z
        let axes = SceneAxes {
            x_dir: Vector3::x(),
            y_dir: -Vector3::z(),
            gravity: Vector3::y(),
        };
        SyntheticBox {
            cuboid: Cuboid::new(
                Vector3::new(0.0, 0.0, z),
                axes,
                [-1.0, 1.0, -0.5, 0.0, -h / 2.0, h / 2.0],
                "bread",
            )
            .unwrap(),
            texture,
        }
    }

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn fronto_parallel_height_matches_pinhole() {
        for (z, h) in [(3.0, 1.2), (4.5, 2.0), (2.2, 0.9)] {
            let b = fronto_box(z, h, Texture::checker([200, 200, 200], [200, 200, 200], 1.0));
            let img = render_view(&ScalarCamera::new(&k(), &Pose::identity()), &[b], [1.0; 3]);
            let col = 320;
            let rows: Vec<u32> = (0..480).filter(|&y| img.get_pixel(col, y).0 != [0, 0, 0]).collect();
            let span = rows.len() as f64;
            let expected = 500.0 * h / z;
            assert!((span - expected).abs() <= 0.5 + 0.5, "span {span} vs {expected}");
            // subpixel: the first/last lit pixel centers bracket the true edges
            let top = 240.0 - expected / 2.0;
            assert!((rows[0] as f64 - top).abs() <= 1.0);
        }
    }

    #[test]
    fn looking_away_renders_nothing() {
        let b = fronto_box(3.0, 1.0, Texture::checker([255, 0, 0], [0, 255, 0], 0.3));
        let away = Pose {
            rotation: Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, -1.0)),
            center: Vector3::zeros(),
        };
        let img = render_view(&ScalarCamera::new(&k(), &away), &[b], [1.0; 3]);
        assert!(img.pixels().all(|p| p.0 == [0, 0, 0]));
    }

    #[test]
    fn checker_corners_land_at_projected_positions() {
        let period = 0.25;
        let b = fronto_box(3.0, 1.5, Texture::checker([250, 250, 250], [10, 10, 10], period));
        let cam = ScalarCamera::new(&k(), &Pose::identity());
        let img = render_view(&cam, &[b.clone()], [1.0; 3]);
        let face = b.cuboid.face(Face::PosY);
        let mut checked = 0;
        for i in 1..8 {
            for j in 1..6 {
                let p = face.corners[0]
                    + (face.corners[1] - face.corners[0]).normalize() * (i as f64 * period)
                    + (face.corners[3] - face.corners[0]).normalize() * (j as f64 * period);
                let [u, v] = cam.project([p.x, p.y, p.z]).unwrap();
                // nearest pixel centers at least half a pixel from the corner
                let (ul, ur) = ((u - 0.5).floor() as u32, (u + 0.5).ceil() as u32);
                let (vt, vb) = ((v - 0.5).floor() as u32, (v + 0.5).ceil() as u32);
                // texture cells around corner (i, j): (i-1, j-1) and (i, j) share a color
                let tl = img.get_pixel(ul, vt).0;
                let br = img.get_pixel(ur, vb).0;
                let tr = img.get_pixel(ur, vt).0;
                let bl = img.get_pixel(ul, vb).0;
                assert_eq!(tl, br, "corner ({i},{j}) at ({u},{v})");
                assert_eq!(tr, bl);
                assert_ne!(tl, tr);
                checked += 1;
            }
        }
        assert_eq!(checked, 35);
    }

    #[test]
    fn rendered_bundle_validates_and_truth_is_consistent() {
        let scene = generate(Preset::SingleFace, 4, &SceneOptions::default()).unwrap();
        for i in 0..scene.poses.len() {
            let r = render_frame(&scene, i);
            r.frame.pose().validate().unwrap();
            assert!(!r.truth.faces.is_empty());
            for f in &r.truth.faces {
                assert!(f.depth > 0.0 && f.distance >= f.depth);
            }
            assert!(r.image.pixels().any(|p| p.0 != [0, 0, 0]));
        }
    }

    #[test]
    fn scalar_camera_agrees_with_geometry_core() {
        let scene = generate(Preset::Aisle, 2, &SceneOptions::default()).unwrap();
        for pose in &scene.poses {
            let cam = ScalarCamera::new(&scene.intrinsics, pose);
            for b in &scene.boxes {
                for c in b.cuboid.corners() {
                    match (
                        cam.project([c.x, c.y, c.z]),
                        crate::geometry::project(&scene.intrinsics, pose, &c),
                    ) {
                        (Some(a), Ok(p)) => assert!((a[0] - p.x).abs() < 1e-9 && (a[1] - p.y).abs() < 1e-9),
                        (None, Err(_)) => {}
                        other => panic!("disagree: {other:?}"),
                    }
                }
            }
        }
    }
}
