//! Deterministic Manhattan cuboid scenes for geometric ground truth.
//!
//! Scenes live in a world with gravity along `+y`. Each preset places
//! textured boxes aligned with a seeded horizontal frame and a camera
//! trajectory that looks at them. Rendering and ground-truth projection go
//! through [`ScalarCamera`], a plain-array pinhole implementation kept apart
//! from [`crate::geometry`] so tests can use one to check the other.

mod export;
mod render;
mod scene;
mod texture;

pub use export::{write_scene, SceneFiles, SceneTruth};
pub use render::{frame_id, render_frame, render_view, FaceTruth, FrameTruth, RenderedFrame, ScalarCamera};
pub use scene::{generate, AisleLayout, Preset, SceneOptions, SyntheticBox, SyntheticScene};
pub use texture::{Pattern, Texture};

/// Default category set; the synthetic textures encode one pattern per entry.
pub const CATEGORIES: [&str; 6] = ["bread", "cereal", "cheese", "dairy", "frozen-food", "meat"];
