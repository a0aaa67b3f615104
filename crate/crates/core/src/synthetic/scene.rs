use std::str::FromStr;

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::texture::{palette, Pattern, Texture};
use super::CATEGORIES;
use crate::annotation::Cuboid;
use crate::geometry::{CameraIntrinsics, Pose, SceneAxes};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// One shelf box, a handful of oblique views of its front face.
    SingleFace,
    /// Two parallel shelf rows, camera walking down the middle.
    Aisle,
    /// One shelf box, camera on an arc around its front face.
    Orbit,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-face" => Ok(Preset::SingleFace),
            "aisle" => Ok(Preset::Aisle),
            "orbit" => Ok(Preset::Orbit),
            _ => Err(Error::InvalidArgument(format!("unknown preset '{s}'"))),
        }
    }
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::SingleFace => "single-face",
            Preset::Aisle => "aisle",
            Preset::Orbit => "orbit",
        }
    }

    fn default_frames(self) -> usize {
        match self {
            Preset::SingleFace => 8,
            Preset::Aisle => 24,
            Preset::Orbit => 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneOptions {
    pub width: u32,
    pub height: u32,
    pub focal: f64,
    /// Trajectory length; `None` uses the preset default.
    pub frames: Option<usize>,
    /// Per-channel gain applied to every texture color (store appearance).
    pub tint: [f64; 3],
}

impl Default for SceneOptions {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            focal: 500.0,
            frames: None,
            tint: [1.0; 3],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticBox {
    pub cuboid: Cuboid,
    pub texture: Texture,
}

/// Aisle geometry in scene coordinates (`a` along the aisle, `b` across it).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AisleLayout {
    /// Shelf fronts sit at `b = -half_width` and `b = +half_width`.
    pub half_width: f64,
    pub section_length: f64,
    pub sections_per_row: usize,
    pub shelf_height: f64,
    pub eye_height: f64,
    /// Largest lateral offset of the camera from the aisle center line.
    pub lateral_jitter: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub preset: Preset,
    pub seed: u64,
    pub intrinsics: CameraIntrinsics,
    pub axes: SceneAxes,
    pub boxes: Vec<SyntheticBox>,
    #[serde(skip)]
    pub poses: Vec<Pose>,
    pub aisle: Option<AisleLayout>,
    pub tint: [f64; 3],
}

impl SyntheticScene {
    /// World point from scene coordinates (along `x_dir`, `y_dir`, gravity).
    pub fn scene_point(&self, a: f64, b: f64, c: f64) -> Vector3<f64> {
        scene_point(&self.axes, a, b, c)
    }
}

fn scene_point(axes: &SceneAxes, a: f64, b: f64, c: f64) -> Vector3<f64> {
    axes.x_dir * a + axes.y_dir * b + axes.gravity * c
}

/// Camera at `center` looking at `target` with gravity pointing image-down,
/// then perturbed by small roll/pitch/yaw angles (radians).
fn look_at(center: Vector3<f64>, target: Vector3<f64>, gravity: &Vector3<f64>, jitter: [f64; 3]) -> Pose {
    let forward = (target - center).normalize();
    let right = gravity.cross(&forward).normalize();
    let down = forward.cross(&right);
    let look = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    let j = Rotation3::from_euler_angles(jitter[0], jitter[1], jitter[2]);
    let rotation = j.matrix() * look;
    // re-orthonormalize to keep validation tolerances comfortable
    let rotation = Rotation3::from_matrix(&rotation).into_inner();
    Pose { rotation, center }
}

fn category_texture(rng: &mut ChaCha8Rng, category: usize) -> Texture {
    let (primary, secondary) = palette(category as f64 * 60.0, rng.random_range(-8.0..8.0));
    Texture {
        pattern: Pattern::ALL[category % Pattern::ALL.len()],
        primary,
        secondary,
        period: 0.25 * rng.random_range(0.85..1.15),
    }
}

/// Generate a scene. Identical `(preset, seed, options)` give identical scenes.
pub fn generate(preset: Preset, seed: u64, options: &SceneOptions) -> Result<SyntheticScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ec0);
    let k = CameraIntrinsics::new(
        options.focal,
        options.focal,
        options.width as f64 / 2.0,
        options.height as f64 / 2.0,
        options.width,
        options.height,
    )?;
    let yaw: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let gravity = Vector3::y();
    let x_dir = Vector3::new(yaw.cos(), 0.0, yaw.sin());
    let axes = SceneAxes {
        x_dir,
        y_dir: gravity.cross(&x_dir),
        gravity,
    };
    let n_frames = options.frames.unwrap_or(preset.default_frames());
    if n_frames == 0 {
        return Err(Error::InvalidArgument("scene needs at least one frame".into()));
    }

    let mut boxes = Vec::new();
    let mut poses = Vec::with_capacity(n_frames);
    let mut aisle = None;
    let jitter = |rng: &mut ChaCha8Rng, mag: f64| {
        [
            rng.random_range(-mag..mag),
            rng.random_range(-mag..mag),
            rng.random_range(-mag..mag),
        ]
    };

    match preset {
        Preset::SingleFace | Preset::Orbit => {
            let category = rng.random_range(0..CATEGORIES.len());
            let half_w = rng.random_range(0.8..1.2);
            let height = rng.random_range(1.4..1.9);
            let cuboid = Cuboid::new(
                Vector3::zeros(),
                axes,
                [-half_w, half_w, 0.0, 0.5, -height, 0.0],
                CATEGORIES[category],
            )?;
            boxes.push(SyntheticBox {
                texture: category_texture(&mut rng, category),
                cuboid,
            });
            let target = scene_point(&axes, 0.0, 0.0, -height / 2.0);
            for i in 0..n_frames {
                let pose = if preset == Preset::SingleFace {
                    let d = rng.random_range(2.5..4.0);
                    let a = rng.random_range(-1.5..1.5);
                    let eye = rng.random_range(-1.7..-1.1);
                    let aim = target + axes.x_dir * rng.random_range(-0.3..0.3);
                    look_at(scene_point(&axes, a, -d, eye), aim, &gravity, jitter(&mut rng, 0.05))
                } else {
                    let t = if n_frames == 1 {
                        0.5
                    } else {
                        i as f64 / (n_frames - 1) as f64
                    };
                    let theta = (-60.0 + 120.0 * t).to_radians();
                    let r = 3.5;
                    let center = target + axes.x_dir * (r * theta.sin()) - axes.y_dir * (r * theta.cos())
                        + axes.gravity * (-0.3 + 0.2 * (3.0 * theta).sin());
                    look_at(center, target, &gravity, [0.02 * (5.0 * theta).sin(), 0.0, 0.0])
                };
                poses.push(pose);
            }
        }
        Preset::Aisle => {
            let layout = AisleLayout {
                half_width: 1.5,
                section_length: 1.5,
                sections_per_row: 4,
                shelf_height: 1.8,
                eye_height: 1.5,
                lateral_jitter: 0.2,
            };
            for (b0, b1) in [
                (-layout.half_width - 0.5, -layout.half_width),
                (layout.half_width, layout.half_width + 0.5),
            ] {
                for s in 0..layout.sections_per_row {
                    let category = rng.random_range(0..CATEGORIES.len());
                    let a0 = s as f64 * layout.section_length;
                    let cuboid = Cuboid::new(
                        Vector3::zeros(),
                        axes,
                        [
                            a0 + 0.02,
                            a0 + layout.section_length - 0.02,
                            b0,
                            b1,
                            -layout.shelf_height,
                            0.0,
                        ],
                        CATEGORIES[category],
                    )?;
                    boxes.push(SyntheticBox {
                        texture: category_texture(&mut rng, category),
                        cuboid,
                    });
                }
            }
            let length = layout.section_length * layout.sections_per_row as f64;
            for i in 0..n_frames {
                let t = if n_frames == 1 {
                    0.5
                } else {
                    i as f64 / (n_frames - 1) as f64
                };
                let a = 0.6 + (length - 1.2) * t;
                let b = rng.random_range(-layout.lateral_jitter..layout.lateral_jitter);
                let side = if i % 2 == 0 { -1.0 } else { 1.0 };
                let look_a = a + rng.random_range(-1.0..1.0);
                let center = scene_point(&axes, a, b, -layout.eye_height);
                let target = scene_point(&axes, look_a, side * layout.half_width, -layout.shelf_height / 2.0);
                poses.push(look_at(center, target, &gravity, jitter(&mut rng, 0.04)));
            }
            aisle = Some(layout);
        }
    }

    for pose in &poses {
        pose.validate()?;
    }
    Ok(SyntheticScene {
        preset,
        seed,
        intrinsics: k,
        axes,
        boxes,
        poses,
        aisle,
        tint: options.tint,
    })
}
