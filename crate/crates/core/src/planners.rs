//! Suction, two-finger and three-finger grasp planners.

use std::time::{Duration, Instant};

use nalgebra::{Isometry3, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{check_capsule, check_collision, line_gap, CollisionMesh};
use crate::geom::{angle_between, Point, Vector};
use crate::gripper::{GripperError, GripperKind, GripperModel};
use crate::mesh::{Ray, TriangleMesh, RAY_EPSILON};
use crate::sampling::{distribute, refine_boundary, refine_rnn, sample_surface, ContactPoint, SurfaceSample};
use crate::segmentation::{segment, Facet, SeedScan, SegmentParams};
use crate::stability::{
    assign_curvature_radii, check_stability, CurvatureMode, PhysicalParams, StabilityError, StabilityReport, DEFAULT_R_MAX,
};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Gripper(#[from] GripperError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error("invalid planner parameter {name} = {value}: {reason}")]
    InvalidParam { name: &'static str, value: f64, reason: &'static str },
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

/// Every tunable of the pipeline. Angles in radians, lengths in mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    pub theta_pln: f64,
    pub theta_fct: f64,
    pub theta_parl: f64,
    pub t_bdry: f64,
    pub t_rnn: f64,
    pub t_dct: f64,
    pub n_da: usize,
    /// Samples per mm².
    pub density: f64,
    pub rng_seed: u64,
    /// Mass, friction, grip force and `h_max`.
    pub phys: PhysicalParams,
    pub seed_scan: SeedScan,
    pub curvature_mode: CurvatureMode,
    pub r_max: f64,
    /// Worker threads; 0 uses the global pool.
    pub jobs: usize,
    /// Keep rejected candidates (with reasons) in the result.
    pub keep_rejected: bool,
}

impl PlannerParams {
    pub fn new(mass: f64) -> Self {
        Self {
            theta_pln: 20f64.to_radians(),
            theta_fct: 20f64.to_radians(),
            theta_parl: 160f64.to_radians(),
            t_bdry: 2.0,
            t_rnn: 3.0,
            t_dct: 3.0,
            n_da: 8,
            density: 0.01,
            rng_seed: 0,
            phys: PhysicalParams::with_mass(mass),
            seed_scan: SeedScan::default(),
            curvature_mode: CurvatureMode::default(),
            r_max: DEFAULT_R_MAX,
            jobs: 0,
            keep_rejected: false,
        }
    }

    pub fn h_max(&self) -> f64 {
        self.phys.h_max
    }

    pub fn segment_params(&self) -> SegmentParams {
        SegmentParams {
            theta_pln: self.theta_pln,
            theta_fct: self.theta_fct,
            seed_scan: self.seed_scan,
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let angle = |name, v: f64| {
            if (0.0..=std::f64::consts::PI).contains(&v) {
                Ok(())
            } else {
                Err(PlanError::InvalidParam {
                    name,
                    value: v,
                    reason: "angle outside [0, 180] degrees",
                })
            }
        };
        angle("theta_pln", self.theta_pln)?;
        angle("theta_fct", self.theta_fct)?;
        angle("theta_parl", self.theta_parl)?;
        if self.theta_fct <= 0.0 {
            return Err(PlanError::InvalidParam {
                name: "theta_fct",
                value: self.theta_fct,
                reason: "must be positive",
            });
        }
        for (name, v) in [("t_bdry", self.t_bdry), ("t_rnn", self.t_rnn), ("t_dct", self.t_dct)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(PlanError::InvalidParam {
                    name,
                    value: v,
                    reason: "must be a non-negative length",
                });
            }
        }
        if self.n_da == 0 {
            return Err(PlanError::InvalidParam {
                name: "n_da",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(PlanError::InvalidParam {
                name: "density",
                value: self.density,
                reason: "must be positive",
            });
        }
        self.phys.validate()?;
        Ok(())
    }
}

/// Why a candidate was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rejection {
    StrokeCollision,
    HandCollision,
    OutOfStroke,
    PadGap,
    Unstable,
}

impl Rejection {
    pub fn as_str(self) -> &'static str {
        match self {
            Rejection::StrokeCollision => "StrokeCollision",
            Rejection::HandCollision => "HandCollision",
            Rejection::OutOfStroke => "OutOfStroke",
            Rejection::PadGap => "PadGap",
            Rejection::Unstable => "Unstable",
        }
    }
}

impl std::str::FromStr for Rejection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Rejection::StrokeCollision,
            Rejection::HandCollision,
            Rejection::OutOfStroke,
            Rejection::PadGap,
            Rejection::Unstable,
        ]
        .into_iter()
        .find(|r| r.as_str() == s)
        .ok_or_else(|| format!("unknown rejection reason {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactPair {
    pub a: ContactPoint,
    pub b: ContactPoint,
    pub facet_a: usize,
    pub facet_b: usize,
    /// Unit vector from `a` to `b`.
    pub axis: Vector,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grasp {
    /// Tool frame to object frame.
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    /// 0 for suction.
    pub jaw_width: f64,
    pub contacts: Vec<ContactPoint>,
    pub rotation_index: usize,
    pub stability: Option<StabilityReport>,
    pub rejection: Option<Rejection>,
}

impl Grasp {
    fn new(pose: &Isometry3<f64>, jaw_width: f64, contacts: Vec<ContactPoint>, k: usize) -> Self {
        Self {
            rotation: pose.rotation.to_rotation_matrix().into_inner(),
            translation: pose.translation.vector,
            jaw_width,
            contacts,
            rotation_index: k,
            stability: None,
            rejection: None,
        }
    }

    pub fn pose(&self) -> Isometry3<f64> {
        let rot = nalgebra::Rotation3::from_matrix_unchecked(self.rotation);
        Isometry3::from_parts(
            nalgebra::Translation3::from(self.translation),
            nalgebra::UnitQuaternion::from_rotation_matrix(&rot),
        )
    }

    pub fn accepted(&self) -> bool {
        self.rejection.is_none()
    }
}

/// Wall-clock time per stage, in the row order of the cost table. Stages
/// evaluated per candidate are summed over all workers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub segmentation: Duration,
    pub sampling: Duration,
    pub remove_bad_1: Duration,
    pub remove_bad_2: Duration,
    pub pair_planning: Duration,
    pub stroke_check: Duration,
    pub hand_check: Duration,
    pub stability: Duration,
}

impl StageTimings {
    pub fn rows(&self) -> [(&'static str, Duration); 8] {
        [
            ("segmentation", self.segmentation),
            ("sampling", self.sampling),
            ("remove_bad_1", self.remove_bad_1),
            ("remove_bad_2", self.remove_bad_2),
            ("pair_planning", self.pair_planning),
            ("stroke_check", self.stroke_check),
            ("hand_check", self.hand_check),
            ("stability", self.stability),
        ]
    }

    fn absorb(&mut self, w: &WorkTimings) {
        self.stroke_check += w.stroke;
        self.hand_check += w.hand;
        self.stability += w.stability;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanCounters {
    pub facets: usize,
    pub samples: usize,
    pub contacts: usize,
    pub refined_contacts: usize,
    pub pairs: usize,
    pub stroke_checks: usize,
    pub roll_checks: usize,
    pub pad_gap_checks: usize,
    pub stability_checks: usize,
    pub accepted: usize,
    pub out_of_stroke: usize,
    pub stroke_collision: usize,
    pub hand_collision: usize,
    pub pad_gap: usize,
    pub unstable: usize,
}

impl PlanCounters {
    fn reject(&mut self, r: Rejection) {
        match r {
            Rejection::OutOfStroke => self.out_of_stroke += 1,
            Rejection::StrokeCollision => self.stroke_collision += 1,
            Rejection::HandCollision => self.hand_collision += 1,
            Rejection::PadGap => self.pad_gap += 1,
            Rejection::Unstable => self.unstable += 1,
        }
    }
}

/// Segmentation and contact sampling shared by all planners.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub facets: Vec<Facet>,
    pub samples: Vec<SurfaceSample>,
    /// Per facet, straight after distribution.
    pub distributed: Vec<Vec<ContactPoint>>,
    /// Per facet, after the boundary filter.
    pub boundary_refined: Vec<Vec<ContactPoint>>,
    /// Per facet, after both filters.
    pub contacts: Vec<Vec<ContactPoint>>,
    pub timings: StageTimings,
}

/// Segments the mesh, samples it and refines the contacts per facet.
pub fn prepare(mesh: &TriangleMesh, params: &PlannerParams) -> Prepared {
    let mut timings = StageTimings::default();
    let t = Instant::now();
    let mut facets = segment(mesh, &params.segment_params());
    assign_curvature_radii(&mut facets, mesh, params.r_max, params.curvature_mode);
    timings.segmentation = t.elapsed();

    let t = Instant::now();
    let samples = sample_surface(mesh, params.density, params.rng_seed);
    let distributed = distribute(&samples, &facets, mesh.len());
    timings.sampling = t.elapsed();

    let t = Instant::now();
    let boundary_refined: Vec<_> = facets
        .par_iter()
        .zip(&distributed)
        .map(|(f, pts)| refine_boundary(f, pts, params.t_bdry))
        .collect();
    timings.remove_bad_1 = t.elapsed();

    let t = Instant::now();
    let contacts = boundary_refined.iter().map(|pts| refine_rnn(pts, params.t_rnn)).collect();
    timings.remove_bad_2 = t.elapsed();

    Prepared {
        facets,
        samples,
        distributed,
        boundary_refined,
        contacts,
        timings,
    }
}

/// Pairs of contacts on nearly opposed facets. For every facet pair whose
/// average normals subtend at least `theta_parl`, each contact on either
/// facet casts a ray against its own inward normal onto the partner facet.
/// Pairs outside `opening_range` (when given) are dropped and exact
/// duplicates (the same two points in either order) are kept once.
pub fn find_parallel_pairs(
    mesh: &TriangleMesh,
    facets: &[Facet],
    contacts: &[Vec<ContactPoint>],
    theta_parl: f64,
    opening_range: Option<[f64; 2]>,
) -> Vec<ContactPair> {
    let mut pairs = Vec::new();
    for i in 0..facets.len() {
        for j in i + 1..facets.len() {
            if angle_between(&facets[i].avg_normal, &facets[j].avg_normal) < theta_parl {
                continue;
            }
            for (src, dst) in [(i, j), (j, i)] {
                for c in &contacts[src] {
                    let Ok(ray) = Ray::new(c.position, -c.normal) else {
                        continue;
                    };
                    let Some(hit) = facets[dst].ray_cast(mesh, &ray) else {
                        continue;
                    };
                    let b = ContactPoint {
                        position: hit.point,
                        normal: facets[dst].avg_normal,
                        facet: dst,
                        triangle: hit.triangle,
                    };
                    let d = b.position - c.position;
                    let distance = d.norm();
                    if distance <= RAY_EPSILON {
                        continue;
                    }
                    if let Some([lo, hi]) = opening_range {
                        if distance < lo || distance > hi {
                            continue;
                        }
                    }
                    pairs.push(ContactPair {
                        a: *c,
                        b,
                        facet_a: src,
                        facet_b: dst,
                        axis: d / distance,
                        distance,
                    });
                }
            }
        }
    }
    dedup_pairs(pairs)
}

fn point_key(p: &Point) -> [u64; 3] {
    [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]
}

fn dedup_pairs(pairs: Vec<ContactPair>) -> Vec<ContactPair> {
    let mut seen = std::collections::HashSet::new();
    pairs
        .into_iter()
        .filter(|p| {
            let (ka, kb) = (point_key(&p.a.position), point_key(&p.b.position));
            seen.insert(if ka <= kb { (ka, kb) } else { (kb, ka) })
        })
        .collect()
}

/// Object and optional obstacles the hand must avoid.
pub struct Scene<'a> {
    pub object: &'a TriangleMesh,
    pub obstacles: Option<&'a TriangleMesh>,
}

impl<'a> Scene<'a> {
    pub fn new(object: &'a TriangleMesh) -> Self {
        Self { object, obstacles: None }
    }

    pub fn with_obstacles(mut self, obstacles: &'a TriangleMesh) -> Self {
        self.obstacles = Some(obstacles);
        self
    }
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    /// Accepted grasps in (pair or contact, roll) order.
    pub grasps: Vec<Grasp>,
    /// Rejected candidates in the same order; empty unless requested.
    pub rejected: Vec<Grasp>,
    pub pairs: Vec<ContactPair>,
    pub prepared: Prepared,
    pub timings: StageTimings,
    pub counters: PlanCounters,
}

#[derive(Debug, Default, Clone)]
struct WorkTimings {
    stroke: Duration,
    hand: Duration,
    stability: Duration,
}

#[derive(Debug, Default)]
struct WorkOutput {
    candidates: Vec<Grasp>,
    counters: PlanCounters,
    timings: WorkTimings,
}

struct Collider {
    object: CollisionMesh,
    obstacles: Option<CollisionMesh>,
}

impl Collider {
    fn new(scene: &Scene) -> Self {
        Self {
            object: CollisionMesh::new(scene.object.clone()),
            obstacles: scene.obstacles.map(|m| CollisionMesh::new(m.clone())),
        }
    }

    fn targets(&self) -> impl Iterator<Item = &CollisionMesh> {
        std::iter::once(&self.object).chain(self.obstacles.as_ref())
    }

    fn hits_mesh(&self, hand: &CollisionMesh, pose: &Isometry3<f64>) -> bool {
        let id = Isometry3::identity();
        self.targets().any(|t| check_collision(hand, pose, t, &id))
    }

    fn hits_capsules(&self, caps: &[crate::collision::Capsule]) -> bool {
        let id = Isometry3::identity();
        caps.iter().any(|c| self.targets().any(|t| check_capsule(c, t, &id)))
    }
}

fn run_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, PlanError> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| PlanError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

fn stability_for(
    center: &Point,
    com: &Point,
    radius: f64,
    params: &PlannerParams,
    timings: &mut WorkTimings,
    counters: &mut PlanCounters,
) -> Result<StabilityReport, Rejection> {
    let t = Instant::now();
    counters.stability_checks += 1;
    // A contact patch deeper than the facet's radius is outside the model;
    // such contacts are treated as unstable rather than as errors.
    let report = check_stability(center, com, radius, &params.phys);
    timings.stability += t.elapsed();
    match report {
        Ok(r) if r.stable => Ok(r),
        _ => Err(Rejection::Unstable),
    }
}

fn facet_radius(facets: &[Facet], f: usize, r_max: f64) -> f64 {
    facets[f].curvature_radius.unwrap_or(r_max)
}

fn finish(
    prepared: Prepared,
    pairs: Vec<ContactPair>,
    outputs: Vec<WorkOutput>,
    mut counters: PlanCounters,
    mut timings: StageTimings,
    keep_rejected: bool,
) -> PlanResult {
    let mut grasps = Vec::new();
    let mut rejected = Vec::new();
    for out in outputs {
        let c = out.counters;
        counters.stroke_checks += c.stroke_checks;
        counters.roll_checks += c.roll_checks;
        counters.pad_gap_checks += c.pad_gap_checks;
        counters.stability_checks += c.stability_checks;
        counters.out_of_stroke += c.out_of_stroke;
        counters.stroke_collision += c.stroke_collision;
        counters.hand_collision += c.hand_collision;
        counters.pad_gap += c.pad_gap;
        counters.unstable += c.unstable;
        timings.absorb(&out.timings);
        for g in out.candidates {
            if g.accepted() {
                grasps.push(g);
            } else if keep_rejected {
                rejected.push(g);
            }
        }
    }
    counters.accepted = grasps.len();
    PlanResult {
        grasps,
        rejected,
        pairs,
        prepared,
        timings,
        counters,
    }
}

fn base_counters(p: &Prepared) -> PlanCounters {
    PlanCounters {
        facets: p.facets.len(),
        samples: p.samples.len(),
        contacts: p.distributed.iter().map(Vec::len).sum(),
        refined_contacts: p.contacts.iter().map(Vec::len).sum(),
        ..Default::default()
    }
}

fn expect_kind(model: &GripperModel, kind: GripperKind, expected: &'static str) -> Result<(), PlanError> {
    if model.kind == kind {
        Ok(())
    } else {
        Err(GripperError::WrongKind {
            expected,
            actual: model.kind,
        }
        .into())
    }
}

pub fn plan_suction(mesh: &TriangleMesh, params: &PlannerParams, model: &GripperModel) -> Result<PlanResult, PlanError> {
    plan_suction_in(&Scene::new(mesh), params, model)
}

pub fn plan_two_finger(mesh: &TriangleMesh, params: &PlannerParams, model: &GripperModel) -> Result<PlanResult, PlanError> {
    plan_two_finger_in(&Scene::new(mesh), params, model)
}

pub fn plan_three_finger(mesh: &TriangleMesh, params: &PlannerParams, model: &GripperModel) -> Result<PlanResult, PlanError> {
    plan_three_finger_in(&Scene::new(mesh), params, model)
}

/// Dispatches on the gripper kind.
pub fn plan(scene: &Scene, params: &PlannerParams, model: &GripperModel) -> Result<PlanResult, PlanError> {
    match model.kind {
        GripperKind::Suction => plan_suction_in(scene, params, model),
        GripperKind::TwoFinger => plan_two_finger_in(scene, params, model),
        GripperKind::ThreeFinger => plan_three_finger_in(scene, params, model),
    }
}

/// Cup poses at every refined contact and roll, filtered by collision and
/// then by the torque condition at the contact.
pub fn plan_suction_in(scene: &Scene, params: &PlannerParams, model: &GripperModel) -> Result<PlanResult, PlanError> {
    expect_kind(model, GripperKind::Suction, "suction")?;
    params.validate()?;
    let mesh = scene.object;
    let prepared = prepare(mesh, params);
    let counters = base_counters(&prepared);
    let timings = prepared.timings.clone();
    let collider = Collider::new(scene);
    let hand = CollisionMesh::new(model.hand_mesh(0.0));
    let com = mesh.com();
    let contacts: Vec<ContactPoint> = prepared.contacts.iter().flatten().copied().collect();

    let outputs = run_pool(params.jobs, || {
        contacts
            .par_iter()
            .map(|c| {
                let mut out = WorkOutput::default();
                let radius = facet_radius(&prepared.facets, c.facet, params.r_max);
                for k in 0..params.n_da {
                    let pose = model.pose_at_contact(&c.position, &c.normal, k, params.n_da).expect("kind checked");
                    let mut g = Grasp::new(&pose, 0.0, vec![*c], k);
                    let t = Instant::now();
                    out.counters.roll_checks += 1;
                    let hit = collider.hits_mesh(&hand, &model.hand_pose(&pose));
                    out.timings.hand += t.elapsed();
                    if hit {
                        g.rejection = Some(Rejection::HandCollision);
                    } else {
                        match stability_for(&c.position, &com, radius, params, &mut out.timings, &mut out.counters) {
                            Ok(r) => g.stability = Some(r),
                            Err(r) => g.rejection = Some(r),
                        }
                    }
                    if let Some(r) = g.rejection {
                        out.counters.reject(r);
                    }
                    out.candidates.push(g);
                }
                out
            })
            .collect::<Vec<_>>()
    })?;
    Ok(finish(prepared, Vec::new(), outputs, counters, timings, params.keep_rejected))
}

/// Antipodal pairs, then an orientation-free stroke check per pair, then the
/// whole hand per roll, then stability at the pair midpoint.
pub fn plan_two_finger_in(scene: &Scene, params: &PlannerParams, model: &GripperModel) -> Result<PlanResult, PlanError> {
    expect_kind(model, GripperKind::TwoFinger, "two_finger")?;
    params.validate()?;
    plan_fingers(scene, params, model)
}

/// As the two-finger planner, but the three stroke capsules and the pad-gap
/// rule for the paired fingers are evaluated per roll.
pub fn plan_three_finger_in(scene: &Scene, params: &PlannerParams, model: &GripperModel) -> Result<PlanResult, PlanError> {
    expect_kind(model, GripperKind::ThreeFinger, "three_finger")?;
    params.validate()?;
    plan_fingers(scene, params, model)
}

fn plan_fingers(scene: &Scene, params: &PlannerParams, model: &GripperModel) -> Result<PlanResult, PlanError> {
    let three = model.kind == GripperKind::ThreeFinger;
    let mesh = scene.object;
    let prepared = prepare(mesh, params);
    let mut counters = base_counters(&prepared);
    let mut timings = prepared.timings.clone();

    let t = Instant::now();
    let pairs = find_parallel_pairs(mesh, &prepared.facets, &prepared.contacts, params.theta_parl, None);
    timings.pair_planning = t.elapsed();
    counters.pairs = pairs.len();

    let collider = Collider::new(scene);
    let com = mesh.com();
    let [lo, hi] = model.opening();

    let outputs = run_pool(params.jobs, || {
        pairs
            .par_iter()
            .map(|pair| {
                let mut out = WorkOutput::default();
                let contacts = vec![pair.a, pair.b];
                let (a, b) = (&pair.a.position, &pair.b.position);
                let reject_pair = |out: &mut WorkOutput, reason: Rejection| {
                    let (pose, w) = model.pair_pose_unchecked(a, b, 0, params.n_da);
                    let mut g = Grasp::new(&pose, w, contacts.clone(), 0);
                    g.rejection = Some(reason);
                    out.counters.reject(reason);
                    out.candidates.push(g);
                };
                if pair.distance < lo || pair.distance > hi {
                    reject_pair(&mut out, Rejection::OutOfStroke);
                    return out;
                }
                let (pose0, width) = model.pose_at_pair(a, b, 0, params.n_da).expect("range checked");
                if !three {
                    let t = Instant::now();
                    out.counters.stroke_checks += 1;
                    let blocked = collider.hits_capsules(&model.stroke_capsules(&pose0, width));
                    out.timings.stroke += t.elapsed();
                    if blocked {
                        reject_pair(&mut out, Rejection::StrokeCollision);
                        return out;
                    }
                }
                let hand = CollisionMesh::new(model.hand_mesh(width));
                let center = nalgebra::center(a, b);
                let radius = facet_radius(&prepared.facets, pair.facet_a, params.r_max)
                    .min(facet_radius(&prepared.facets, pair.facet_b, params.r_max));
                for k in 0..params.n_da {
                    let (pose, _) = model.pose_at_pair(a, b, k, params.n_da).expect("range checked");
                    let mut g = Grasp::new(&pose, width, contacts.clone(), k);
                    g.rejection = (|| {
                        if three {
                            let t = Instant::now();
                            out.counters.stroke_checks += 1;
                            let blocked = collider.hits_capsules(&model.stroke_capsules(&pose, width));
                            out.timings.stroke += t.elapsed();
                            if blocked {
                                return Some(Rejection::StrokeCollision);
                            }
                            out.counters.pad_gap_checks += 1;
                            let closing = model.world_closing_axis(&pose);
                            let pads = model.world_pad_centers(&pose, width);
                            let id = Isometry3::identity();
                            let ok = pads[1..].iter().all(|p| {
                                line_gap(&collider.object, &id, p, &closing)
                                    .is_some_and(|gap| gap <= params.t_dct + RAY_EPSILON)
                            });
                            if !ok {
                                return Some(Rejection::PadGap);
                            }
                        }
                        let t = Instant::now();
                        out.counters.roll_checks += 1;
                        let hit = collider.hits_mesh(&hand, &model.hand_pose(&pose));
                        out.timings.hand += t.elapsed();
                        if hit {
                            return Some(Rejection::HandCollision);
                        }
                        match stability_for(&center, &com, radius, params, &mut out.timings, &mut out.counters) {
                            Ok(r) => {
                                g.stability = Some(r);
                                None
                            }
                            Err(r) => Some(r),
                        }
                    })();
                    if let Some(r) = g.rejection {
                        out.counters.reject(r);
                    }
                    out.candidates.push(g);
                }
                out
            })
            .collect::<Vec<_>>()
    })?;
    Ok(finish(prepared, pairs, outputs, counters, timings, params.keep_rejected))
}
