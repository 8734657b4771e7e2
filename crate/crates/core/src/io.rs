//! Run configuration, grasp-list files and OBJ debug scenes.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Point, Vector};
use crate::gripper::GripperModel;
use crate::mesh::TriangleMesh;
use crate::planners::{ContactPair, Grasp, PlannerParams, Rejection};
use crate::sampling::ContactPoint;
use crate::segmentation::{Facet, SeedScan};
use crate::stability::CurvatureMode;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot access {path}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("cannot parse config")]
    Toml(#[from] toml::de::Error),
    #[error("bad record on line {line}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    Suction,
    TwoFinger,
    ThreeFinger,
}

impl std::str::FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "suction" => Ok(Self::Suction),
            "two_finger" => Ok(Self::TwoFinger),
            "three_finger" => Ok(Self::ThreeFinger),
            _ => Err(format!("unknown planner {s:?} (expected suction, two_finger or three_finger)")),
        }
    }
}

/// Optional parameter values from a config file or the command line.
/// Angles are in degrees.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub theta_pln: Option<f64>,
    pub theta_fct: Option<f64>,
    pub theta_parl: Option<f64>,
    pub t_bdry: Option<f64>,
    pub t_rnn: Option<f64>,
    pub t_dct: Option<f64>,
    pub h_max: Option<f64>,
    pub n_da: Option<usize>,
    pub density: Option<f64>,
    pub seed: Option<u64>,
    pub mass: Option<f64>,
    pub mu: Option<f64>,
    pub grip_force: Option<f64>,
    pub gravity: Option<f64>,
    pub r_max: Option<f64>,
    pub seed_scan: Option<SeedScan>,
    pub curvature_mode: Option<CurvatureMode>,
    pub jobs: Option<usize>,
}

impl ParamOverrides {
    /// Fields set in `other` win.
    pub fn merged(&self, other: &ParamOverrides) -> ParamOverrides {
        macro_rules! pick {
            ($($f:ident),*) => {
                ParamOverrides { $($f: other.$f.or(self.$f)),* }
            };
        }
        pick!(
            theta_pln,
            theta_fct,
            theta_parl,
            t_bdry,
            t_rnn,
            t_dct,
            h_max,
            n_da,
            density,
            seed,
            mass,
            mu,
            grip_force,
            gravity,
            r_max,
            seed_scan,
            curvature_mode,
            jobs
        )
    }

    /// Planner parameters on top of the defaults. Mass has no default.
    pub fn to_params(&self) -> Result<PlannerParams, IoError> {
        let mass = self
            .mass
            .ok_or_else(|| IoError::Config("mass (kg) is required".into()))?;
        let mut p = PlannerParams::new(mass);
        if let Some(v) = self.theta_pln {
            p.theta_pln = v.to_radians();
        }
        if let Some(v) = self.theta_fct {
            p.theta_fct = v.to_radians();
        }
        if let Some(v) = self.theta_parl {
            p.theta_parl = v.to_radians();
        }
        p.t_bdry = self.t_bdry.unwrap_or(p.t_bdry);
        p.t_rnn = self.t_rnn.unwrap_or(p.t_rnn);
        p.t_dct = self.t_dct.unwrap_or(p.t_dct);
        p.phys.h_max = self.h_max.unwrap_or(p.phys.h_max);
        p.n_da = self.n_da.unwrap_or(p.n_da);
        p.density = self.density.unwrap_or(p.density);
        p.rng_seed = self.seed.unwrap_or(p.rng_seed);
        p.phys.friction_mu = self.mu.unwrap_or(p.phys.friction_mu);
        p.phys.grip_force = self.grip_force.unwrap_or(p.phys.grip_force);
        p.phys.gravity = self.gravity.unwrap_or(p.phys.gravity);
        p.r_max = self.r_max.unwrap_or(p.r_max);
        p.seed_scan = self.seed_scan.unwrap_or(p.seed_scan);
        p.curvature_mode = self.curvature_mode.unwrap_or(p.curvature_mode);
        p.jobs = self.jobs.unwrap_or(p.jobs);
        p.validate().map_err(|e| IoError::Config(e.to_string()))?;
        Ok(p)
    }
}

/// Contents of a run configuration file. Every field may be overridden on
/// the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub object_mesh: Option<PathBuf>,
    pub obstacles: Option<PathBuf>,
    pub gripper_profile: Option<String>,
    pub planner: Option<PlannerKind>,
    pub output: Option<PathBuf>,
    pub export_debug: Option<bool>,
    #[serde(default)]
    pub params: ParamOverrides,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, IoError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(|source| IoError::File {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Relative paths in the file are taken relative to `base`.
    pub fn resolve_paths(mut self, base: &Path) -> Self {
        let fix = |p: Option<PathBuf>| p.map(|p| if p.is_relative() { base.join(p) } else { p });
        self.object_mesh = fix(self.object_mesh);
        self.obstacles = fix(self.obstacles);
        self.output = fix(self.output);
        if let Some(g) = &self.gripper_profile {
            let candidate = base.join(g);
            if Path::new(g).is_relative() && candidate.is_file() {
                self.gripper_profile = Some(candidate.to_string_lossy().into_owned());
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactRecord {
    pub position: [f64; 3],
    pub normal: [f64; 3],
    pub facet: usize,
    pub triangle: usize,
}

impl From<&ContactPoint> for ContactRecord {
    fn from(c: &ContactPoint) -> Self {
        Self {
            position: c.position.coords.into(),
            normal: c.normal.into(),
            facet: c.facet,
            triangle: c.triangle,
        }
    }
}

/// One line of a grasp-list file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspRecord {
    /// Row-major tool-to-object rotation.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub jaw_width: f64,
    pub contacts: Vec<ContactRecord>,
    pub rotation_index: usize,
    /// `None` when the candidate never reached the stability check.
    pub margin: Option<f64>,
    /// Empty for accepted grasps.
    pub reason: String,
}

impl From<&Grasp> for GraspRecord {
    fn from(g: &Grasp) -> Self {
        let r = &g.rotation;
        Self {
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            translation: g.translation.into(),
            jaw_width: g.jaw_width,
            contacts: g.contacts.iter().map(ContactRecord::from).collect(),
            rotation_index: g.rotation_index,
            margin: g.stability.map(|s| s.margin),
            reason: g.rejection.map(|r| r.as_str().to_string()).unwrap_or_default(),
        }
    }
}

impl GraspRecord {
    pub fn rejection(&self) -> Option<Rejection> {
        if self.reason.is_empty() {
            None
        } else {
            self.reason.parse().ok()
        }
    }
}

pub fn write_jsonl<T: Serialize>(mut w: impl Write, items: impl IntoIterator<Item = T>) -> Result<(), IoError> {
    for (i, item) in items.into_iter().enumerate() {
        serde_json::to_writer(&mut w, &item).map_err(|source| {
            if source.is_io() {
                IoError::Io(source.into())
            } else {
                IoError::Json { line: i + 1, source }
            }
        })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(r: impl BufRead) -> Result<Vec<T>, IoError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| IoError::Json { line: i + 1, source })?);
    }
    Ok(out)
}

pub fn write_grasp_list<'a>(w: impl Write, grasps: impl IntoIterator<Item = &'a Grasp>) -> Result<(), IoError> {
    write_jsonl(w, grasps.into_iter().map(GraspRecord::from))
}

pub fn read_grasp_list(r: impl BufRead) -> Result<Vec<GraspRecord>, IoError> {
    read_jsonl(r)
}

/// Facet summary written by the `segment` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetRecord {
    pub id: usize,
    pub seed_triangle: usize,
    pub members: Vec<usize>,
    pub avg_normal: [f64; 3],
    pub area: f64,
    pub boundary_edges: usize,
    pub curvature_radius: Option<f64>,
}

impl FacetRecord {
    pub fn new(id: usize, f: &Facet) -> Self {
        Self {
            id,
            seed_triangle: f.seed_triangle,
            members: f.members.clone(),
            avg_normal: f.avg_normal.into(),
            area: f.area,
            boundary_edges: f.boundary_edges.len(),
            curvature_radius: f.curvature_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub a: ContactRecord,
    pub b: ContactRecord,
    pub distance: f64,
}

impl From<&ContactPair> for PairRecord {
    fn from(p: &ContactPair) -> Self {
        Self {
            a: ContactRecord::from(&p.a),
            b: ContactRecord::from(&p.b),
            distance: p.distance,
        }
    }
}

pub const WHITE: [f64; 3] = [1.0, 1.0, 1.0];
pub const RED: [f64; 3] = [1.0, 0.0, 0.0];
pub const GREY: [f64; 3] = [0.5, 0.5, 0.5];

/// Minimal OBJ writer using the `v x y z r g b` vertex-color extension.
pub struct ObjWriter<W: Write> {
    out: W,
    vertices: usize,
}

impl<W: Write> ObjWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out, vertices: 0 }
    }

    pub fn group(&mut self, name: &str) -> std::io::Result<()> {
        writeln!(self.out, "g {name}")
    }

    pub fn point(&mut self, p: &Point, color: [f64; 3]) -> std::io::Result<()> {
        writeln!(self.out, "v {} {} {} {} {} {}", p.x, p.y, p.z, color[0], color[1], color[2])?;
        self.vertices += 1;
        Ok(())
    }

    /// Writes the listed triangles of `mesh`, each vertex moved by `offset`.
    pub fn triangles(
        &mut self,
        mesh: &TriangleMesh,
        triangles: impl IntoIterator<Item = usize>,
        offset: &Vector,
        color: [f64; 3],
    ) -> std::io::Result<()> {
        for t in triangles {
            let base = self.vertices + 1;
            for p in mesh.triangle_points(t) {
                self.point(&(p + offset), color)?;
            }
            writeln!(self.out, "f {} {} {}", base, base + 1, base + 2)?;
        }
        Ok(())
    }

    pub fn mesh(&mut self, mesh: &TriangleMesh, color: [f64; 3]) -> std::io::Result<()> {
        let base = self.vertices + 1;
        for p in mesh.vertices() {
            self.point(p, color)?;
        }
        for [a, b, c] in mesh.triangles() {
            writeln!(self.out, "f {} {} {}", base + a, base + b, base + c)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Facets as OBJ groups with seeded random colors, each pushed out along its
/// average normal by `explode` mm.
pub fn export_facets_obj(w: impl Write, mesh: &TriangleMesh, facets: &[Facet], explode: f64, seed: u64) -> std::io::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obj = ObjWriter::new(w);
    for (i, f) in facets.iter().enumerate() {
        let color = [rng.random(), rng.random(), rng.random()];
        obj.group(&format!("facet_{i}"))?;
        obj.triangles(mesh, f.members.iter().copied(), &(f.avg_normal * explode), color)?;
    }
    obj.finish()?;
    Ok(())
}

/// Sample cloud: boundary-removed points white, RNN-removed grey, survivors
/// red.
pub fn export_samples_obj(
    w: impl Write,
    distributed: &[Vec<ContactPoint>],
    boundary_refined: &[Vec<ContactPoint>],
    refined: &[Vec<ContactPoint>],
) -> std::io::Result<()> {
    let mut obj = ObjWriter::new(w);
    for (f, all) in distributed.iter().enumerate() {
        obj.group(&format!("facet_{f}"))?;
        for p in all {
            let color = if refined[f].contains(p) {
                RED
            } else if boundary_refined[f].contains(p) {
                GREY
            } else {
                WHITE
            };
            obj.point(&p.position, color)?;
        }
    }
    obj.finish()?;
    Ok(())
}

/// Object plus every hand pose: accepted white, rejected red.
pub fn export_grasps_obj(
    w: impl Write,
    mesh: &TriangleMesh,
    model: &GripperModel,
    accepted: &[Grasp],
    rejected: &[Grasp],
) -> std::io::Result<()> {
    let mut obj = ObjWriter::new(w);
    obj.group("object")?;
    obj.mesh(mesh, GREY)?;
    for (name, list, color) in [("accepted", accepted, WHITE), ("rejected", rejected, RED)] {
        for (i, g) in list.iter().enumerate() {
            obj.group(&format!("{name}_{i}"))?;
            let pose = model.hand_pose(&g.pose());
            obj.mesh(&model.hand_mesh(g.jaw_width).transformed(&pose), color)?;
        }
    }
    obj.finish()?;
    Ok(())
}
