use std::collections::BTreeMap;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{Cuboid, Face};
use crate::geometry::{triangulate, Bundle, SceneAxes, DEPTH_EPS};
use crate::{Error, Result};

pub type BoxId = u64;

/// Default half-size of a new box, as a fraction of the origin's distance
/// to the camera it was triangulated from.
const DEFAULT_HALF_SIZE: f64 = 0.05;

/// One mutation of a session. The log of applied edits replays to the
/// current state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Edit {
    SetVanishingPoints {
        frame: String,
        vp_x: [f64; 2],
        vp_y: [f64; 2],
    },
    TriangulateOrigin {
        frame_a: String,
        px_a: [f64; 2],
        frame_b: String,
        px_b: [f64; 2],
    },
    CreateBox {
        category: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        extents: Option<[f64; 6]>,
    },
    MoveFace {
        box_id: BoxId,
        face: Face,
        delta: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FacePolygon {
    pub face: Face,
    pub visible: bool,
    /// Corner pixels (top-left, top-right, bottom-right, bottom-left), present
    /// when all four corners are in front of the camera.
    pub pixels: Option<[[f64; 2]; 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxProjection {
    pub frame: String,
    pub box_id: BoxId,
    /// Corner pixels in [`Cuboid::corners`] order; `None` behind the camera.
    pub corners: [Option<[f64; 2]>; 8],
    pub faces: Vec<FacePolygon>,
    /// False when no face is visible (box behind the camera, camera inside).
    pub visible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Propagation {
    pub box_id: BoxId,
    pub labeled: Vec<BoxProjection>,
    pub skipped: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub id: BoxId,
    pub category: String,
    pub origin: [f64; 3],
    /// Row-major `[x_dir; y_dir; gravity]`.
    pub axes: [f64; 9],
    /// `[-x, +x, -y, +y, -z, +z]` face offsets along the axes.
    pub extents: [f64; 6],
}

impl BoxRecord {
    pub fn from_cuboid(id: BoxId, c: &Cuboid) -> Self {
        Self {
            id,
            category: c.category.clone(),
            origin: [c.origin.x, c.origin.y, c.origin.z],
            axes: c.axes.to_row_major(),
            extents: c.extents,
        }
    }

    pub fn to_cuboid(&self) -> Result<Cuboid> {
        Cuboid::new(
            Vector3::from_column_slice(&self.origin),
            SceneAxes::from_row_major(&self.axes),
            self.extents,
            self.category.clone(),
        )
    }
}

/// Label file: boxes plus their per-frame projections.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelExport {
    pub boxes: Vec<BoxRecord>,
    #[serde(default)]
    pub frames: Vec<BoxProjection>,
}

impl LabelExport {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("labels: {e}")))
    }
}

/// Single-writer labeling state for one bundle.
#[derive(Clone, Debug)]
pub struct AnnotationSession {
    bundle: Bundle,
    axes: Option<SceneAxes>,
    origin: Option<Vector3<f64>>,
    origin_distance: f64,
    boxes: BTreeMap<BoxId, Cuboid>,
    next_box: BoxId,
    log: Vec<Edit>,
}

impl AnnotationSession {
    pub fn new(bundle: Bundle) -> Self {
        Self {
            bundle,
            axes: None,
            origin: None,
            origin_distance: 1.0,
            boxes: BTreeMap::new(),
            next_box: 0,
            log: Vec::new(),
        }
    }

    /// Fresh session with `log` re-applied in order.
    pub fn replay(bundle: Bundle, log: &[Edit]) -> Result<Self> {
        let mut s = Self::new(bundle);
        for edit in log {
            s.apply(edit.clone())?;
        }
        Ok(s)
    }

    pub fn bundle(&self) -> &Bundle {
        &self.bundle
    }

    pub fn axes(&self) -> Option<&SceneAxes> {
        self.axes.as_ref()
    }

    pub fn origin(&self) -> Option<Vector3<f64>> {
        self.origin
    }

    pub fn log(&self) -> &[Edit] {
        &self.log
    }

    pub fn boxes(&self) -> impl Iterator<Item = (BoxId, &Cuboid)> {
        self.boxes.iter().map(|(id, b)| (*id, b))
    }

    pub fn get_box(&self, id: BoxId) -> Result<&Cuboid> {
        self.boxes.get(&id).ok_or_else(|| Error::NotFound {
            what: "box",
            id: id.to_string(),
        })
    }

    /// Apply an edit; it is logged only when it succeeds.
    pub fn apply(&mut self, edit: Edit) -> Result<()> {
        match &edit {
            Edit::SetVanishingPoints { frame, vp_x, vp_y } => {
                self.set_vanishing_points_inner(frame, vp_x, vp_y)?;
            }
            Edit::TriangulateOrigin {
                frame_a,
                px_a,
                frame_b,
                px_b,
            } => {
                self.triangulate_origin_inner(frame_a, px_a, frame_b, px_b)?;
            }
            Edit::CreateBox { category, extents } => {
                self.create_box_inner(category, *extents)?;
            }
            Edit::MoveFace { box_id, face, delta } => {
                self.move_face_inner(*box_id, *face, *delta)?;
            }
        }
        self.log.push(edit);
        Ok(())
    }

    /// Scene axes from two clicked vanishing points. Existing boxes are
    /// re-expressed in the new axes (origin and extents unchanged).
    pub fn set_vanishing_points(&mut self, frame: &str, vp_x: [f64; 2], vp_y: [f64; 2]) -> Result<SceneAxes> {
        self.apply(Edit::SetVanishingPoints {
            frame: frame.to_string(),
            vp_x,
            vp_y,
        })?;
        Ok(self.axes.expect("axes set by successful edit"))
    }

    pub fn triangulate_origin(
        &mut self,
        frame_a: &str,
        px_a: [f64; 2],
        frame_b: &str,
        px_b: [f64; 2],
    ) -> Result<Vector3<f64>> {
        self.apply(Edit::TriangulateOrigin {
            frame_a: frame_a.to_string(),
            px_a,
            frame_b: frame_b.to_string(),
            px_b,
        })?;
        Ok(self.origin.expect("origin set by successful edit"))
    }

    /// New box at the triangulated origin. Without explicit extents the box
    /// is a cube scaled to the origin's distance from the camera.
    pub fn create_box(&mut self, category: &str, extents: Option<[f64; 6]>) -> Result<BoxId> {
        let id = self.next_box;
        self.apply(Edit::CreateBox {
            category: category.to_string(),
            extents,
        })?;
        Ok(id)
    }

    pub fn move_face(&mut self, box_id: BoxId, face: Face, delta: f64) -> Result<Cuboid> {
        self.apply(Edit::MoveFace { box_id, face, delta })?;
        Ok(self.boxes[&box_id].clone())
    }

    fn set_vanishing_points_inner(&mut self, frame: &str, vp_x: &[f64; 2], vp_y: &[f64; 2]) -> Result<()> {
        let pose = self.bundle.frame(frame)?.pose();
        let axes = SceneAxes::from_vanishing_points(
            &self.bundle.intrinsics,
            &pose,
            &Vector2::from(*vp_x),
            &Vector2::from(*vp_y),
        )?;
        for b in self.boxes.values_mut() {
            b.axes = axes;
        }
        self.axes = Some(axes);
        Ok(())
    }

    fn triangulate_origin_inner(
        &mut self,
        frame_a: &str,
        px_a: &[f64; 2],
        frame_b: &str,
        px_b: &[f64; 2],
    ) -> Result<()> {
        let pose_a = self.bundle.frame(frame_a)?.pose();
        let pose_b = self.bundle.frame(frame_b)?.pose();
        let origin = triangulate(
            &self.bundle.intrinsics,
            &Vector2::from(*px_a),
            &pose_a,
            &Vector2::from(*px_b),
            &pose_b,
        )?;
        self.origin_distance = (origin - pose_a.center).norm();
        self.origin = Some(origin);
        Ok(())
    }

    fn create_box_inner(&mut self, category: &str, extents: Option<[f64; 6]>) -> Result<()> {
        let axes = self.axes.ok_or(Error::AxesNotSet)?;
        let origin = self
            .origin
            .ok_or_else(|| Error::InvalidArgument("origin has not been triangulated".into()))?;
        let extents = extents.unwrap_or_else(|| {
            let h = DEFAULT_HALF_SIZE * self.origin_distance;
            [-h, h, -h, h, -h, h]
        });
        let cuboid = Cuboid::new(origin, axes, extents, category)?;
        self.boxes.insert(self.next_box, cuboid);
        self.next_box += 1;
        Ok(())
    }

    fn move_face_inner(&mut self, box_id: BoxId, face: Face, delta: f64) -> Result<()> {
        let moved = self.get_box(box_id)?.moved(face, delta)?;
        self.boxes.insert(box_id, moved);
        Ok(())
    }

    pub fn project_box(&self, box_id: BoxId, frame: &str) -> Result<BoxProjection> {
        let cuboid = self.get_box(box_id)?;
        let f = self.bundle.frame(frame)?;
        Ok(project_cuboid(&self.bundle, cuboid, box_id, &f.id, &f.pose()))
    }

    /// Project a box into every frame of the bundle.
    pub fn propagate(&self, box_id: BoxId) -> Result<Propagation> {
        let cuboid = self.get_box(box_id)?;
        let mut labeled = Vec::new();
        let mut skipped = Vec::new();
        for f in &self.bundle.frames {
            let p = project_cuboid(&self.bundle, cuboid, box_id, &f.id, &f.pose());
            if p.visible {
                labeled.push(p);
            } else {
                skipped.push(f.id.clone());
            }
        }
        Ok(Propagation {
            box_id,
            labeled,
            skipped,
        })
    }

    /// All boxes plus their projections into every frame where they are visible.
    pub fn export(&self) -> LabelExport {
        let boxes: Vec<(BoxId, Cuboid)> = self.boxes.iter().map(|(id, c)| (*id, c.clone())).collect();
        LabelExport::build(&self.bundle, &boxes)
    }
}

impl LabelExport {
    /// Records for `boxes` plus their projections into every frame of
    /// `bundle` where they are visible.
    pub fn build(bundle: &Bundle, boxes: &[(BoxId, Cuboid)]) -> Self {
        let records = boxes.iter().map(|(id, c)| BoxRecord::from_cuboid(*id, c)).collect();
        let mut frames = Vec::new();
        for f in &bundle.frames {
            let pose = f.pose();
            for (id, c) in boxes {
                let p = project_cuboid(bundle, c, *id, &f.id, &pose);
                if p.visible {
                    frames.push(p);
                }
            }
        }
        LabelExport { boxes: records, frames }
    }
}

/// Project a cuboid into one frame. Faces are visible when they face the
/// camera and all four corners lie in front of it.
pub fn project_cuboid(
    bundle: &Bundle,
    cuboid: &Cuboid,
    box_id: BoxId,
    frame: &str,
    pose: &crate::geometry::Pose,
) -> BoxProjection {
    let k = &bundle.intrinsics;
    let world = cuboid.corners();
    let corners: [Option<[f64; 2]>; 8] =
        std::array::from_fn(|i| crate::geometry::project(k, pose, &world[i]).ok().map(|p| [p.x, p.y]));
    let mut faces = Vec::with_capacity(6);
    let mut any_visible = false;
    for face in Face::ALL {
        let idx = cuboid.face_corner_indices(face);
        let pixels = if idx.iter().all(|&i| corners[i].is_some()) {
            Some(idx.map(|i| corners[i].unwrap()))
        } else {
            None
        };
        let normal = cuboid.outward_normal(face);
        let facing = normal.dot(&(pose.center - world[idx[0]])) > DEPTH_EPS;
        let visible = facing && pixels.is_some();
        any_visible |= visible;
        faces.push(FacePolygon { face, visible, pixels });
    }
    BoxProjection {
        frame: frame.to_string(),
        box_id,
        corners,
        faces,
        visible: any_visible,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{project, BundleFrame, CameraIntrinsics, Pose};
    use nalgebra::Matrix3;

    fn bundle(centers: &[[f64; 3]]) -> Bundle {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        let frames = centers
            .iter()
            .enumerate()
            .map(|(i, c)| {
                BundleFrame::from_pose(
                    i.to_string(),
                    format!("{i}.png"),
                    &Pose {
                        rotation: Matrix3::identity(),
                        center: Vector3::from(*c),
                    },
                )
            })
            .collect();
        Bundle {
            intrinsics: k,
            frames,
            base_dir: Default::default(),
        }
    }

    fn labeled_session() -> AnnotationSession {
        let mut s = AnnotationSession::new(bundle(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]));
        s.set_vanishing_points("0", [2000.0, 240.0], [-900.0, 240.0]).unwrap();
        let target = Vector3::new(0.2, 0.1, 5.0);
        let k = s.bundle().intrinsics;
        let pa = project(&k, &s.bundle().frames[0].pose(), &target).unwrap();
        let pb = project(&k, &s.bundle().frames[1].pose(), &target).unwrap();
        s.triangulate_origin("0", [pa.x, pa.y], "1", [pb.x, pb.y]).unwrap();
        s
    }

    #[test]
    fn midline_vps_give_down_gravity() {
        let s = labeled_session();
        assert!((s.axes().unwrap().gravity - Vector3::y()).norm() < 1e-12);
        assert!((s.origin().unwrap() - Vector3::new(0.2, 0.1, 5.0)).norm() < 1e-9);
    }

    #[test]
    fn same_pixel_vps_are_rejected_without_logging() {
        let mut s = AnnotationSession::new(bundle(&[[0.0; 3]]));
        let err = s.set_vanishing_points("0", [10.0, 10.0], [10.0, 10.0]);
        assert!(matches!(err, Err(Error::DegenerateAxes(_))));
        assert!(s.log().is_empty());
        assert!(s.set_vanishing_points("nope", [1.0, 1.0], [2.0, 2.0]).is_err());
    }

    #[test]
    fn box_requires_axes_and_origin() {
        let mut s = AnnotationSession::new(bundle(&[[0.0; 3]]));
        assert!(matches!(s.create_box("bread", None), Err(Error::AxesNotSet)));
    }

    #[test]
    fn rejected_move_leaves_state_unchanged() {
        let mut s = labeled_session();
        let id = s.create_box("dairy", Some([-0.5, 0.5, -0.5, 0.5, -0.5, 0.5])).unwrap();
        let m = s.move_face(id, Face::PosX, 0.1).unwrap();
        assert_eq!(m.extents[1], 0.6);
        let before = s.get_box(id).unwrap().clone();
        let log_len = s.log().len();
        assert!(matches!(s.move_face(id, Face::PosX, -2.0), Err(Error::InvalidMove(_))));
        assert_eq!(s.get_box(id).unwrap(), &before);
        assert_eq!(s.log().len(), log_len);
    }

    #[test]
    fn replay_reproduces_state() {
        let mut s = labeled_session();
        let id = s.create_box("meat", None).unwrap();
        for (i, face) in Face::ALL.iter().enumerate() {
            s.move_face(
                id,
                *face,
                0.013 * (i as f64 + 1.0) * if face.is_max() { 1.0 } else { -1.0 },
            )
            .unwrap();
        }
        let _ = s.move_face(id, Face::NegY, 10.0);
        let r = AnnotationSession::replay(s.bundle().clone(), s.log()).unwrap();
        assert_eq!(r.get_box(id).unwrap(), s.get_box(id).unwrap());
        assert_eq!(r.export(), s.export());
    }

    #[test]
    fn centered_box_projects_symmetrically() {
        let mut s = labeled_session();
        let axes = SceneAxes {
            x_dir: Vector3::x(),
            y_dir: -Vector3::z(),
            gravity: Vector3::y(),
        };
        let cube = Cuboid::new(
            Vector3::new(0.0, 0.0, 5.0),
            axes,
            [-0.5, 0.5, -0.5, 0.5, -0.5, 0.5],
            "cereal",
        )
        .unwrap();
        s.boxes.insert(7, cube);
        let p = s.project_box(7, "2").unwrap();
        let k = s.bundle().intrinsics;
        let (mut su, mut sv) = (0.0, 0.0);
        for c in p.corners.iter().flatten() {
            su += c[0] - k.cx;
            sv += c[1] - k.cy;
        }
        assert!(su.abs() < 1e-9 && sv.abs() < 1e-9, "{su} {sv}");
        assert!(p.visible);
        let visible: Vec<Face> = p.faces.iter().filter(|f| f.visible).map(|f| f.face).collect();
        assert_eq!(visible, vec![Face::PosY]);
    }

    #[test]
    fn camera_inside_box_is_not_visible() {
        let mut s = labeled_session();
        let o = s.origin().unwrap();
        let id = s
            .create_box(
                "frozen-food",
                Some([-o.x - 1.0, -o.x + 1.0, -8.0, 8.0, -o.y - 1.0, -o.y + 1.0]),
            )
            .unwrap();
        let p = s.project_box(id, "0").unwrap();
        assert!(!p.visible);
        assert!(p.faces.iter().all(|f| !f.visible));
    }

    #[test]
    fn propagation_over_static_camera_is_constant() {
        let mut s = labeled_session();
        let id = s.create_box("bread", None).unwrap();
        let prop = s.propagate(id).unwrap();
        assert_eq!(prop.labeled.len() + prop.skipped.len(), 3);
        let p0 = &prop.labeled[0];
        let p2 = prop.labeled.iter().find(|p| p.frame == "2").unwrap();
        assert_eq!(p0.corners, p2.corners);
        for p in &prop.labeled {
            assert_eq!(p, &s.project_box(id, &p.frame).unwrap());
        }
    }

    #[test]
    fn edit_log_serializes() {
        let mut s = labeled_session();
        let id = s.create_box("bread", None).unwrap();
        s.move_face(id, Face::PosZ, 0.25).unwrap();
        let json = serde_json::to_string(s.log()).unwrap();
        let back: Vec<Edit> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s.log());
    }
}
