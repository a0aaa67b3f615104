//! Geometry backend for 3D box labeling over a registered frame batch.
//!
//! A labeler clicks two horizontal vanishing points to fix the scene axes,
//! clicks one point in two frames to triangulate a box origin, then grows or
//! shrinks individual faces. Because the box lives in world coordinates its
//! projection into every other frame of the batch comes for free.

mod cuboid;
mod session;

pub use cuboid::{Cuboid, Face};
pub use session::{
    project_cuboid, AnnotationSession, BoxId, BoxProjection, BoxRecord, Edit, FacePolygon, LabelExport, Propagation,
};
