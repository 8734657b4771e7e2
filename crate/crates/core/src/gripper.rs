//! Parametric end-effectors: box-built collision meshes, tool poses at a
//! contact or contact pair, and stroke capsules.
//!
//! Geometry is built in a canonical hand frame with the approach direction
//! along +z and the closing direction along +y. The palm sits on the -z side
//! of the fingertips. A profile may name other tool axes; the returned poses
//! are then expressed for those axes.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::{Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::Capsule;
use crate::fixtures::{box_mesh, cylinder};
use crate::geom::{Point, Vector};
use crate::mesh::TriangleMesh;

/// Pad and cup clearance from the surface, mm.
pub const CONTACT_CLEARANCE: f64 = 0.1;

/// Environment variable searched for gripper profiles.
pub const PROFILE_DIR_ENV: &str = "GRASPFORGE_PROFILE_DIR";

const BUNDLED: [(&str, &str); 3] = [
    ("robotiq85", include_str!("../../../profiles/robotiq85.toml")),
    ("suction10", include_str!("../../../profiles/suction10.toml")),
    ("three_finger40", include_str!("../../../profiles/three_finger40.toml")),
];

#[derive(Debug, Error)]
pub enum GripperError {
    #[error("gripper kind is {actual:?}, operation needs {expected}")]
    WrongKind { expected: &'static str, actual: GripperKind },
    #[error("pair distance {distance} mm outside opening range [{min}, {max}]")]
    OutOfStroke { distance: f64, min: f64, max: f64 },
    #[error("invalid gripper profile: {0}")]
    Invalid(String),
    #[error("cannot read profile {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse profile")]
    Parse(#[from] toml::de::Error),
    #[error("no gripper profile named {0:?}")]
    Unknown(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripperKind {
    Suction,
    TwoFinger,
    ThreeFinger,
}

/// Palm box: `width` along tool x, `depth` along the closing axis, `height`
/// along the approach axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PalmBox {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
}

/// Finger pad box and the link connecting it to the palm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerSpec {
    /// Along tool x.
    pub pad_width: f64,
    /// Along the closing axis.
    pub pad_thickness: f64,
    /// Along the approach axis.
    pub pad_length: f64,
    /// Link length between pad and palm.
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuctionCup {
    pub radius: f64,
    pub length: f64,
    #[serde(default = "default_segments")]
    pub segments: usize,
}

fn default_segments() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripperModel {
    pub name: String,
    pub kind: GripperKind,
    pub palm: PalmBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finger: Option<FingerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opening_range: Option<[f64; 2]>,
    pub approach_axis: [f64; 3],
    pub closing_axis: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suction_cup: Option<SuctionCup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finger_gap: Option<f64>,
}

fn positive(name: &str, v: f64) -> Result<(), GripperError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(GripperError::Invalid(format!("{name} must be positive, got {v}")))
    }
}

impl GripperModel {
    pub fn from_toml_str(text: &str) -> Result<Self, GripperError> {
        let model: GripperModel = toml::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self, GripperError> {
        let text = std::fs::read_to_string(path).map_err(|source| GripperError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn bundled(name: &str) -> Result<Self, GripperError> {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| GripperError::Unknown(name.to_string()))
            .and_then(|(_, text)| Self::from_toml_str(text))
    }

    pub fn bundled_names() -> impl Iterator<Item = &'static str> {
        BUNDLED.iter().map(|(n, _)| *n)
    }

    /// Resolves a profile given as a path, a file in the profile directory
    /// (with or without `.toml`), or a bundled profile name.
    pub fn resolve(spec: &str) -> Result<Self, GripperError> {
        let direct = Path::new(spec);
        if direct.is_file() {
            return Self::load(direct);
        }
        if let Some(dir) = std::env::var_os(PROFILE_DIR_ENV) {
            let dir = PathBuf::from(dir);
            for candidate in [dir.join(spec), dir.join(format!("{spec}.toml"))] {
                if candidate.is_file() {
                    return Self::load(&candidate);
                }
            }
        }
        Self::bundled(spec.trim_end_matches(".toml"))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("gripper model serializes")
    }

    pub fn validate(&self) -> Result<(), GripperError> {
        positive("palm.width", self.palm.width)?;
        positive("palm.depth", self.palm.depth)?;
        positive("palm.height", self.palm.height)?;
        let a = Vector::from(self.approach_axis);
        let c = Vector::from(self.closing_axis);
        if (a.norm() - 1.0).abs() > 1e-9 || (c.norm() - 1.0).abs() > 1e-9 || a.dot(&c).abs() > 1e-9 {
            return Err(GripperError::Invalid("approach and closing axes must be orthonormal".into()));
        }
        match self.kind {
            GripperKind::Suction => {
                let cup = self
                    .suction_cup
                    .ok_or_else(|| GripperError::Invalid("suction kind needs [suction_cup]".into()))?;
                positive("suction_cup.radius", cup.radius)?;
                positive("suction_cup.length", cup.length)?;
                if cup.segments < 3 {
                    return Err(GripperError::Invalid("suction_cup.segments must be at least 3".into()));
                }
            }
            GripperKind::TwoFinger | GripperKind::ThreeFinger => {
                let f = self
                    .finger
                    .ok_or_else(|| GripperError::Invalid("finger kinds need [finger]".into()))?;
                positive("finger.pad_width", f.pad_width)?;
                positive("finger.pad_thickness", f.pad_thickness)?;
                positive("finger.pad_length", f.pad_length)?;
                positive("finger.length", f.length)?;
                let [lo, hi] = self
                    .opening_range
                    .ok_or_else(|| GripperError::Invalid("finger kinds need opening_range".into()))?;
                if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
                    return Err(GripperError::Invalid(format!("opening_range [{lo}, {hi}] is not 0 <= min < max")));
                }
                if self.kind == GripperKind::ThreeFinger {
                    let gap = self
                        .finger_gap
                        .ok_or_else(|| GripperError::Invalid("three_finger kind needs finger_gap".into()))?;
                    positive("finger_gap", gap)?;
                }
            }
        }
        Ok(())
    }

    pub fn opening(&self) -> [f64; 2] {
        self.opening_range.unwrap_or([0.0, 0.0])
    }

    fn finger_spec(&self) -> FingerSpec {
        self.finger.expect("finger kinds carry a finger spec")
    }

    /// Stroke capsule radius: the pad's circumradius.
    pub fn pad_circumradius(&self) -> f64 {
        let f = self.finger_spec();
        0.5 * f.pad_width.hypot(f.pad_length)
    }

    /// Rotation taking tool coordinates to the canonical hand frame.
    fn tool_to_canonical(&self) -> Rotation3<f64> {
        let z = Vector::from(self.approach_axis);
        let y = Vector::from(self.closing_axis);
        let x = y.cross(&z);
        // Rows are the tool axes expressed in tool coordinates.
        Rotation3::from_matrix_unchecked(Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]))
    }

    fn to_tool_pose(&self, canonical: Isometry3<f64>) -> Isometry3<f64> {
        let r = UnitQuaternion::from_rotation_matrix(&self.tool_to_canonical());
        canonical * Isometry3::from_parts(Translation3::identity(), r)
    }

    fn canonical_pose(&self, tool: &Isometry3<f64>) -> Isometry3<f64> {
        let r = UnitQuaternion::from_rotation_matrix(&self.tool_to_canonical());
        tool * Isometry3::from_parts(Translation3::identity(), r.inverse())
    }

    /// Pad centers in the canonical frame for the given jaw width: f₁ on the
    /// -y side, then f₂ (and f₃) on the +y side.
    pub fn pad_centers(&self, jaw_width: f64) -> Vec<Point> {
        let h = jaw_width / 2.0;
        match self.kind {
            GripperKind::Suction => vec![Point::origin()],
            GripperKind::TwoFinger => vec![Point::new(0.0, -h, 0.0), Point::new(0.0, h, 0.0)],
            GripperKind::ThreeFinger => {
                let g = self.finger_gap.unwrap_or(0.0) / 2.0;
                vec![
                    Point::new(0.0, -h, 0.0),
                    Point::new(g, h, 0.0),
                    Point::new(-g, h, 0.0),
                ]
            }
        }
    }

    /// Whole-hand collision mesh in the canonical frame. Pads and the cup rim
    /// are held back from the contact surface by [`CONTACT_CLEARANCE`].
    pub fn hand_mesh(&self, jaw_width: f64) -> TriangleMesh {
        let eps = CONTACT_CLEARANCE;
        let palm = self.palm;
        let mut parts = Vec::new();
        let palm_box = |z_top: f64| {
            box_mesh(
                Point::new(-palm.width / 2.0, -palm.depth / 2.0, z_top - palm.height),
                Point::new(palm.width / 2.0, palm.depth / 2.0, z_top),
            )
        };
        match self.kind {
            GripperKind::Suction => {
                let cup = self.suction_cup.expect("suction kind carries a cup");
                let body = cylinder(cup.radius, cup.length, cup.segments)
                    .transformed(&Isometry3::translation(0.0, 0.0, -eps - cup.length));
                parts.push(body);
                parts.push(palm_box(-eps - cup.length));
            }
            GripperKind::TwoFinger | GripperKind::ThreeFinger => {
                let f = self.finger_spec();
                let z_tip = f.pad_length / 2.0;
                let z_root = -f.pad_length / 2.0 - f.length;
                for c in self.pad_centers(jaw_width) {
                    let inner = c.y.abs() + eps;
                    let (y0, y1) = if c.y < 0.0 {
                        (-inner - f.pad_thickness, -inner)
                    } else {
                        (inner, inner + f.pad_thickness)
                    };
                    parts.push(box_mesh(
                        Point::new(c.x - f.pad_width / 2.0, y0, z_root),
                        Point::new(c.x + f.pad_width / 2.0, y1, z_tip),
                    ));
                }
                parts.push(palm_box(z_root));
            }
        }
        let refs: Vec<&TriangleMesh> = parts.iter().collect();
        TriangleMesh::merge(&refs).expect("hand parts are valid boxes")
    }

    /// Canonical-frame pose for a suction contact: approach against the
    /// normal, rolled about it from the projected global +x (or +y).
    fn canonical_contact_pose(&self, position: &Point, normal: &Vector, k: usize, n_da: usize) -> Isometry3<f64> {
        let z = -normal.normalize();
        let reference = reference_direction(&z);
        let x = roll(&reference, &z, k, n_da);
        let y = z.cross(&x);
        frame(x, y, z, position)
    }

    /// Canonical-frame pose for a contact pair: closing along a→b, approach
    /// from the projected global +x (or +y), rolled about the pair axis.
    fn canonical_pair_pose(&self, a: &Point, b: &Point, k: usize, n_da: usize) -> (Isometry3<f64>, f64) {
        let d = b - a;
        let width = d.norm();
        let y = d / width;
        let reference = reference_direction(&y);
        let z = roll(&reference, &y, k, n_da);
        let x = y.cross(&z);
        (frame(x, y, z, &nalgebra::center(a, b)), width)
    }

    /// Tool pose for a suction grasp at `contact` with roll `k` of `n_da`.
    pub fn pose_at_contact(&self, position: &Point, normal: &Vector, k: usize, n_da: usize) -> Result<Isometry3<f64>, GripperError> {
        if self.kind != GripperKind::Suction {
            return Err(GripperError::WrongKind {
                expected: "suction",
                actual: self.kind,
            });
        }
        Ok(self.to_tool_pose(self.canonical_contact_pose(position, normal, k, n_da)))
    }

    /// Tool pose and jaw width for a finger grasp on the pair `a`, `b`.
    pub fn pose_at_pair(&self, a: &Point, b: &Point, k: usize, n_da: usize) -> Result<(Isometry3<f64>, f64), GripperError> {
        if self.kind == GripperKind::Suction {
            return Err(GripperError::WrongKind {
                expected: "two_finger or three_finger",
                actual: self.kind,
            });
        }
        let distance = (b - a).norm();
        let [min, max] = self.opening();
        if !(distance >= min && distance <= max) || distance == 0.0 {
            return Err(GripperError::OutOfStroke { distance, min, max });
        }
        let (pose, width) = self.canonical_pair_pose(a, b, k, n_da);
        Ok((self.to_tool_pose(pose), width))
    }

    /// Like [`pose_at_pair`](Self::pose_at_pair) without the kind and
    /// stroke checks; used to place rejected candidates in debug scenes.
    pub fn pair_pose_unchecked(&self, a: &Point, b: &Point, k: usize, n_da: usize) -> (Isometry3<f64>, f64) {
        let (pose, width) = self.canonical_pair_pose(a, b, k, n_da);
        (self.to_tool_pose(pose), width)
    }

    /// Pad centers of a posed hand in the object frame.
    pub fn world_pad_centers(&self, tool_pose: &Isometry3<f64>, jaw_width: f64) -> Vec<Point> {
        let canonical = self.canonical_pose(tool_pose);
        self.pad_centers(jaw_width).iter().map(|p| canonical * p).collect()
    }

    /// Hand mesh pose in the object frame for a tool pose.
    pub fn hand_pose(&self, tool_pose: &Isometry3<f64>) -> Isometry3<f64> {
        self.canonical_pose(tool_pose)
    }

    /// Closing direction of a posed hand in the object frame (f₁ toward f₂).
    pub fn world_closing_axis(&self, tool_pose: &Isometry3<f64>) -> Vector {
        self.canonical_pose(tool_pose) * Vector::y()
    }

    /// One capsule per finger covering its travel from the fully open
    /// position to just short of the contact.
    pub fn stroke_capsules(&self, tool_pose: &Isometry3<f64>, jaw_width: f64) -> Vec<Capsule> {
        let canonical = self.canonical_pose(tool_pose);
        let r = self.pad_circumradius();
        let open = self.opening()[1] / 2.0;
        let stop = jaw_width / 2.0 + r + CONTACT_CLEARANCE;
        self.pad_centers(jaw_width)
            .iter()
            .map(|c| {
                let side = c.y.signum();
                let start = Point::new(c.x, side * open, c.z);
                let end = Point::new(c.x, side * stop, c.z);
                let start = if open > stop { start } else { end };
                Capsule::new(canonical * start, canonical * end, r)
            })
            .collect()
    }
}

fn reference_direction(axis: &Vector) -> Vector {
    let project = |v: Vector| v - axis * axis.dot(&v);
    let px = project(Vector::x());
    if px.norm() > 1e-6 {
        px.normalize()
    } else {
        project(Vector::y()).normalize()
    }
}

/// Rotates `v` (perpendicular to `axis`) about `axis` by `2π k / n`.
fn roll(v: &Vector, axis: &Vector, k: usize, n: usize) -> Vector {
    let phi = 2.0 * PI * k as f64 / n.max(1) as f64;
    (v * phi.cos() + axis.cross(v) * phi.sin()).normalize()
}

fn frame(x: Vector, y: Vector, z: Vector, origin: &Point) -> Isometry3<f64> {
    let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
    Isometry3::from_parts(Translation3::from(origin.coords), UnitQuaternion::from_rotation_matrix(&rot))
}
