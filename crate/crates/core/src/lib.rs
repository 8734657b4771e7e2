//! Grasp synthesis for rigid objects given as triangle meshes.
//!
//! The pipeline segments a mesh into overlapping near-planar facets, samples
//! contacts over the surface and distributes them to facets, drops contacts
//! near facet boundaries or too close to each other, and then plans suction,
//! two-finger or three-finger grasps that are collision-free and pass a
//! soft-finger torque check.
//!
//! ```
//! use graspforge::{fixtures, gripper::GripperModel, planners::{plan_two_finger, PlannerParams}};
//!
//! let cube = fixtures::cube(40.0);
//! let gripper = GripperModel::bundled("robotiq85").unwrap();
//! let result = plan_two_finger(&cube, &PlannerParams::new(0.1), &gripper).unwrap();
//! assert!(!result.grasps.is_empty());
//! ```

pub mod collision;
pub mod fixtures;
pub mod geom;
pub mod gripper;
pub mod io;
pub mod mesh;
pub mod planners;
pub mod sampling;
pub mod segmentation;
pub mod stability;

pub use geom::{Point, Vector};
pub use mesh::{load_mesh, MeshError, MeshFormat, Ray, RayHit, TriangleMesh};
