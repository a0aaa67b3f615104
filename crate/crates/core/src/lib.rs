//! Egocentric cognitive-map toolkit.
//!
//! The crate turns registered first-person frames into object-centric views
//! and descriptors:
//!
//! - [`geometry`]: pinhole algebra, vanishing-point axes, gravity and
//!   two-view triangulation, plus the reconstruction bundle format.
//! - [`rectification`]: frontalizing homographies, canonical scaling and
//!   image resampling.
//! - [`strips`]: uniform-width strip sampling and canvas normalization.
//! - [`features`]: strip descriptors and the `ECOF` feature file format.
//! - [`descriptor`]: weighted composition of strip features into scene
//!   descriptors.
//! - [`adaptation`]: adversarial residual feature adaptation with
//!   hand-written backpropagation.
//! - [`evaluation`]: nearest-neighbor recall curves and a softmax strip
//!   classifier.
//! - [`annotation`]: session state for geometry-assisted 3D box labeling.
//! - [`synthetic`]: deterministic Manhattan scenes used as ground truth.
//! - [`pipeline`]: the batch warp, strip and feature steps over whole
//!   bundles.

pub mod adaptation;
pub mod annotation;
pub mod descriptor;
mod error;
pub mod evaluation;
pub mod features;
pub mod geometry;
pub mod pipeline;
pub mod rectification;
pub mod strips;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
