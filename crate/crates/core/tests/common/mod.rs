//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use graspforge::collision::{capsule_hits_triangle, triangles_intersect, Capsule};
use graspforge::gripper::GripperModel;
use graspforge::planners::{Grasp, PlannerParams, Prepared};
use graspforge::sampling::ContactPoint;
use graspforge::{Point, TriangleMesh, Vector};
use nalgebra::Isometry3;

pub fn world_triangles(mesh: &TriangleMesh, pose: &Isometry3<f64>) -> Vec<[Point; 3]> {
    let verts: Vec<Point> = mesh.vertices().iter().map(|p| pose * p).collect();
    mesh.triangles().iter().map(|[a, b, c]| [verts[*a], verts[*b], verts[*c]]).collect()
}

/// All-pairs triangle test.
pub fn brute_collision(a: &TriangleMesh, pa: &Isometry3<f64>, b: &TriangleMesh, pb: &Isometry3<f64>) -> bool {
    let ta = world_triangles(a, pa);
    let tb = world_triangles(b, pb);
    ta.iter().any(|x| tb.iter().any(|y| triangles_intersect(x, y)))
}

pub fn brute_capsule(cap: &Capsule, mesh: &TriangleMesh) -> bool {
    (0..mesh.len()).any(|t| capsule_hits_triangle(cap, &mesh.triangle_points(t)))
}

/// Plain Möller–Trumbore, nearest hit with `t > eps`.
pub fn ray_hit(origin: &Point, dir: &Vector, tri: &[Point; 3], eps: f64) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-14 {
        return None;
    }
    let f = 1.0 / det;
    let s = origin - tri[0];
    let u = f * s.dot(&h);
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = f * dir.dot(&q);
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = f * e2.dot(&q);
    (t > eps).then_some(t)
}

pub fn angle(a: &Vector, b: &Vector) -> f64 {
    (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos()
}

/// Reference pair: both contact positions.
#[derive(Debug, Clone, Copy)]
pub struct RefPair {
    pub a: ContactPoint,
    pub b: Point,
    pub facet_b: usize,
}

/// Every facet pair, every contact, nearest hit on the partner facet.
pub fn brute_pairs(mesh: &TriangleMesh, p: &Prepared, theta_parl: f64) -> Vec<RefPair> {
    let mut out = Vec::new();
    for i in 0..p.facets.len() {
        for j in 0..p.facets.len() {
            if i == j || angle(&p.facets[i].avg_normal, &p.facets[j].avg_normal) < theta_parl {
                continue;
            }
            for c in &p.contacts[i] {
                let dir = -c.normal.normalize();
                let best = p.facets[j]
                    .members
                    .iter()
                    .filter_map(|&t| ray_hit(&c.position, &dir, &mesh.triangle_points(t), 1e-6))
                    .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.min(t))));
                if let Some(t) = best {
                    out.push(RefPair {
                        a: *c,
                        b: c.position + dir * t,
                        facet_b: j,
                    });
                }
            }
        }
    }
    out
}

pub fn margin(center: &Point, com: &Point, radius: f64, params: &PlannerParams) -> f64 {
    let ph = &params.phys;
    let h = ph.h_max;
    let mg = ph.mass * ph.gravity;
    let f = ph.friction_mu * ph.grip_force;
    let c = (center - com).norm();
    (8.0f64 / 15.0).powi(2) * (2.0 * radius * h - h * h) * (f * f - mg * mg) - (mg * c).powi(2)
}

/// Closed-form torque condition, outside the model's domain counts as unstable.
pub fn stable(center: &Point, com: &Point, radius: f64, params: &PlannerParams) -> bool {
    let ph = &params.phys;
    let headroom = ph.friction_mu * ph.grip_force > ph.mass * ph.gravity;
    radius > ph.h_max && headroom && margin(center, com, radius, params) >= 0.0
}

/// Record key at micrometre resolution for set comparisons.
pub type GraspKey = (Vec<i64>, usize);

pub fn key_of(rotation: &[f64; 9], translation: &[f64; 3], contacts: &[Point], k: usize) -> GraspKey {
    let q = |x: f64| (x * 1e6).round() as i64;
    let mut v: Vec<i64> = rotation.iter().map(|x| q(*x)).collect();
    v.extend(translation.iter().map(|x| q(*x)));
    for c in contacts {
        v.extend([q(c.x), q(c.y), q(c.z)]);
    }
    (v, k)
}

pub fn grasp_key(g: &Grasp) -> GraspKey {
    let r = g.rotation;
    let rot = [r[(0, 0)], r[(0, 1)], r[(0, 2)], r[(1, 0)], r[(1, 1)], r[(1, 2)], r[(2, 0)], r[(2, 1)], r[(2, 2)]];
    let t = [g.translation.x, g.translation.y, g.translation.z];
    let contacts: Vec<Point> = g.contacts.iter().map(|c| c.position).collect();
    key_of(&rot, &t, &contacts, g.rotation_index)
}

/// Reference two-finger pipeline: brute pairs, brute stroke capsules, brute
/// whole-hand collision per roll, closed-form stability. Uses the library
/// only for segmentation/sampling (via `prepared`) and gripper posing.
pub fn reference_two_finger(mesh: &TriangleMesh, prepared: &Prepared, params: &PlannerParams, model: &GripperModel) -> BTreeSet<GraspKey> {
    let mut pairs = brute_pairs(mesh, prepared, params.theta_parl);
    // Drop exact duplicates of the same unordered point pair.
    let mut seen = BTreeSet::new();
    pairs.retain(|p| {
        let k = |x: &Point| [x.x.to_bits(), x.y.to_bits(), x.z.to_bits()];
        let (ka, kb) = (k(&p.a.position), k(&p.b));
        seen.insert(if ka <= kb { (ka, kb) } else { (kb, ka) })
    });
    let [lo, hi] = model.opening();
    let com = mesh.com();
    let id = Isometry3::identity();
    let mut out = BTreeSet::new();
    for p in &pairs {
        let (a, b) = (p.a.position, p.b);
        let d = (b - a).norm();
        if d <= 1e-6 || d < lo || d > hi {
            continue;
        }
        let (pose0, w) = model.pose_at_pair(&a, &b, 0, params.n_da).unwrap();
        if model.stroke_capsules(&pose0, w).iter().any(|c| brute_capsule(c, mesh)) {
            continue;
        }
        let hand = model.hand_mesh(w);
        let ra = prepared.facets[p.a.facet].curvature_radius.unwrap_or(params.r_max);
        let rb = prepared.facets[p.facet_b].curvature_radius.unwrap_or(params.r_max);
        let radius = ra.min(rb);
        for k in 0..params.n_da {
            let (pose, _) = model.pose_at_pair(&a, &b, k, params.n_da).unwrap();
            if brute_collision(&hand, &model.hand_pose(&pose), mesh, &id) {
                continue;
            }
            if !stable(&nalgebra::center(&a, &b), &com, radius, params) {
                continue;
            }
            let m = pose.rotation.to_rotation_matrix().into_inner();
            let rot = [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 0)], m[(1, 1)], m[(1, 2)], m[(2, 0)], m[(2, 1)], m[(2, 2)]];
            let t = pose.translation.vector;
            out.insert(key_of(&rot, &[t.x, t.y, t.z], &[a, b], k));
        }
    }
    out
}
