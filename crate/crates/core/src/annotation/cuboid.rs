use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::SceneAxes;
use crate::rectification::CuboidFace;
use crate::{Error, Result};

/// One of the six box faces, named by the axis it is extremal along.
/// The `z` axis is gravity, so `-z` is the top and `+z` the bottom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Face {
    #[serde(rename = "-x")]
    NegX,
    #[serde(rename = "+x")]
    PosX,
    #[serde(rename = "-y")]
    NegY,
    #[serde(rename = "+y")]
    PosY,
    #[serde(rename = "-z")]
    NegZ,
    #[serde(rename = "+z")]
    PosZ,
}

impl Face {
    pub const ALL: [Face; 6] = [Face::NegX, Face::PosX, Face::NegY, Face::PosY, Face::NegZ, Face::PosZ];
    pub const VERTICAL: [Face; 4] = [Face::NegX, Face::PosX, Face::NegY, Face::PosY];

    /// Index into [`Cuboid::extents`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn axis(self) -> usize {
        self.index() / 2
    }

    pub fn is_max(self) -> bool {
        self.index() % 2 == 1
    }

    pub fn opposite(self) -> Face {
        Face::ALL[self.index() ^ 1]
    }

    pub fn parse(s: &str) -> Option<Face> {
        Some(match s {
            "-x" => Face::NegX,
            "+x" | "x" => Face::PosX,
            "-y" => Face::NegY,
            "+y" | "y" => Face::PosY,
            "-z" => Face::NegZ,
            "+z" | "z" => Face::PosZ,
            _ => return None,
        })
    }
}

/// Box aligned with the scene axes: `origin + a x + b y + c g` for
/// `a in [extents[0], extents[1]]`, `b in [extents[2], extents[3]]`,
/// `c in [extents[4], extents[5]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cuboid {
    pub origin: Vector3<f64>,
    pub axes: SceneAxes,
    pub extents: [f64; 6],
    pub category: String,
}

impl Cuboid {
    pub fn new(origin: Vector3<f64>, axes: SceneAxes, extents: [f64; 6], category: impl Into<String>) -> Result<Self> {
        for axis in 0..3 {
            if !(extents[2 * axis + 1] > extents[2 * axis]) {
                return Err(Error::InvalidArgument(format!(
                    "extents along axis {axis} must satisfy max > min"
                )));
            }
        }
        Ok(Self {
            origin,
            axes,
            extents,
            category: category.into(),
        })
    }

    pub fn point(&self, a: f64, b: f64, c: f64) -> Vector3<f64> {
        self.origin + self.axes.x_dir * a + self.axes.y_dir * b + self.axes.gravity * c
    }

    /// Corner `i` uses the max extent along axis `j` when bit `j` of `i` is set.
    pub fn corners(&self) -> [Vector3<f64>; 8] {
        std::array::from_fn(|i| {
            let e = &self.extents;
            self.point(e[i & 1], e[2 + ((i >> 1) & 1)], e[4 + ((i >> 2) & 1)])
        })
    }

    /// Corner indices of `face`, ordered top-left, top-right, bottom-right,
    /// bottom-left as seen from outside (for vertical faces).
    pub fn face_corner_indices(&self, face: Face) -> [usize; 4] {
        let axis = face.axis();
        let fixed_bit = (face.is_max() as usize) << axis;
        let (u_axis, v_axis) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let normal = self.outward_normal(face);
        let right = normal.cross(&self.axes.gravity);
        // along u: left is the end with the smaller projection on `right`
        let u_flip = right.dot(&self.axes.axis(u_axis)) < 0.0;
        let idx = |u_max: bool, v_max: bool| fixed_bit | ((u_max as usize) << u_axis) | ((v_max as usize) << v_axis);
        let (l, r) = (u_flip, !u_flip);
        [idx(l, false), idx(r, false), idx(r, true), idx(l, true)]
    }

    pub fn outward_normal(&self, face: Face) -> Vector3<f64> {
        let n = self.axes.axis(face.axis());
        if face.is_max() {
            n
        } else {
            -n
        }
    }

    pub fn face(&self, face: Face) -> CuboidFace {
        let corners = self.corners();
        let idx = self.face_corner_indices(face);
        let pts = idx.map(|i| corners[i]);
        let normal = self.outward_normal(face);
        let offset = normal.dot(&pts[0]);
        let height = (pts[3] - pts[0]).norm();
        CuboidFace {
            normal,
            offset,
            corners: pts,
            height,
        }
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        let d = p - self.origin;
        let coords = [
            d.dot(&self.axes.x_dir),
            d.dot(&self.axes.y_dir),
            d.dot(&self.axes.gravity),
        ];
        (0..3).all(|a| coords[a] > self.extents[2 * a] && coords[a] < self.extents[2 * a + 1])
    }

    /// Shift one face along its axis. Rejected when the box would lose volume.
    pub fn moved(&self, face: Face, delta: f64) -> Result<Cuboid> {
        if !delta.is_finite() {
            return Err(Error::InvalidMove(format!("non-finite delta {delta}")));
        }
        let mut out = self.clone();
        out.extents[face.index()] += delta;
        let axis = face.axis();
        if !(out.extents[2 * axis + 1] > out.extents[2 * axis]) {
            return Err(Error::InvalidMove(format!(
                "moving {face:?} by {delta} would invert the box"
            )));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axes() -> SceneAxes {
        SceneAxes {
            x_dir: Vector3::x(),
            y_dir: Vector3::z(),
            gravity: -Vector3::y(),
        }
    }

    #[test]
    fn axes_fixture_is_right_handed() {
        let a = axes();
        assert_eq!(a.x_dir.cross(&a.y_dir), a.gravity);
    }

    #[test]
    fn faces_have_outward_normals_and_consistent_corners() {
        let b = Cuboid::new(
            Vector3::new(1.0, 2.0, 3.0),
            axes(),
            [-1.0, 2.0, -0.5, 1.5, -2.0, 0.0],
            "bread",
        )
        .unwrap();
        let center = b.point(0.5, 0.5, -1.0);
        for face in Face::ALL {
            let f = b.face(face);
            let fc = f.centroid();
            assert!(f.normal.dot(&(fc - center)) > 0.0, "{face:?}");
            for c in &f.corners {
                assert!((f.normal.dot(c) - f.offset).abs() < 1e-12);
            }
        }
        for face in Face::VERTICAL {
            let f = b.face(face);
            // top corners are higher (smaller gravity coordinate)
            let g = b.axes.gravity;
            assert!(f.corners[0].dot(&g) < f.corners[3].dot(&g));
            assert!((f.height - 2.0).abs() < 1e-12);
            // left-to-right follows normal x gravity
            let right = f.normal.cross(&g);
            assert!((f.corners[1] - f.corners[0]).dot(&right) > 0.0);
        }
    }

    #[test]
    fn move_face_updates_one_extent() {
        let b = Cuboid::new(Vector3::zeros(), axes(), [0.0, 1.0, 0.0, 1.0, -1.0, 0.0], "cheese").unwrap();
        let m = b.moved(Face::PosX, 0.1).unwrap();
        assert_eq!(m.extents[1], 1.1);
        assert_eq!(&m.extents[2..], &b.extents[2..]);
        assert_eq!(m.extents[0], 0.0);
        assert!(matches!(b.moved(Face::PosX, -1.0), Err(Error::InvalidMove(_))));
        assert!(matches!(b.moved(Face::NegZ, 1.5), Err(Error::InvalidMove(_))));
    }

    #[test]
    fn rejects_empty_boxes() {
        assert!(Cuboid::new(Vector3::zeros(), axes(), [0.0, 0.0, 0.0, 1.0, 0.0, 1.0], "x").is_err());
    }

    #[test]
    fn face_names_round_trip() {
        for f in Face::ALL {
            let s = serde_json::to_string(&f).unwrap();
            assert_eq!(Face::parse(s.trim_matches('"')), Some(f));
            assert_eq!(f.opposite().opposite(), f);
        }
    }
}
