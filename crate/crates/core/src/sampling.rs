//! Whole-surface contact sampling, distribution to facets and the two
//! refinement filters (boundary clearance and radius-nearest-neighbour).

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{point_segment_distance, Point, Vector};
use crate::mesh::TriangleMesh;
use crate::segmentation::{triangle_to_facets, Facet};

/// A raw surface sample before distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSample {
    pub position: Point,
    pub triangle: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    pub position: Point,
    /// Average normal of the owning facet.
    pub normal: Vector,
    pub facet: usize,
    pub triangle: usize,
}

/// Area-weighted stratified sampling. Per-triangle counts come from rounding
/// the running sum of `area * density`, so the total is the rounded total
/// expectation and no triangle drifts by more than one sample.
pub fn sample_surface(mesh: &TriangleMesh, density: f64, rng_seed: u64) -> Vec<SurfaceSample> {
    assert!(density > 0.0, "density must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = Vec::with_capacity((mesh.total_area() * density).round() as usize + 1);
    let mut cumulative = 0.0;
    let mut emitted = 0usize;
    for t in 0..mesh.len() {
        cumulative += mesh.face_area(t) * density;
        let target = cumulative.round() as usize;
        let count = target.saturating_sub(emitted);
        emitted += count;
        let [a, b, c] = mesh.triangle_points(t);
        let (ab, ac) = (b - a, c - a);
        for _ in 0..count {
            let mut u: f64 = rng.random();
            let mut v: f64 = rng.random();
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            out.push(SurfaceSample {
                position: a + ab * u + ac * v,
                triangle: t,
            });
        }
    }
    out
}

/// Copies every sample into each facet containing its triangle.
pub fn distribute(samples: &[SurfaceSample], facets: &[Facet], triangle_count: usize) -> Vec<Vec<ContactPoint>> {
    let owners = triangle_to_facets(facets, triangle_count);
    let mut out = vec![Vec::new(); facets.len()];
    for s in samples {
        for &f in &owners[s.triangle] {
            out[f].push(ContactPoint {
                position: s.position,
                normal: facets[f].avg_normal,
                facet: f,
                triangle: s.triangle,
            });
        }
    }
    out
}

/// Distance from `p` to the nearest boundary edge of `facet`.
pub fn boundary_distance(facet: &Facet, p: &Point) -> f64 {
    facet
        .boundary_edges
        .iter()
        .map(|e| point_segment_distance(p, &e.a, &e.b))
        .fold(f64::INFINITY, f64::min)
}

/// Drops points closer than `t_bdry` to the facet boundary.
pub fn refine_boundary(facet: &Facet, points: &[ContactPoint], t_bdry: f64) -> Vec<ContactPoint> {
    if t_bdry <= 0.0 {
        return points.to_vec();
    }
    points
        .iter()
        .filter(|p| {
            !facet
                .boundary_edges
                .iter()
                .any(|e| point_segment_distance(&p.position, &e.a, &e.b) < t_bdry)
        })
        .copied()
        .collect()
}

/// Greedy thinning in input order: a point survives iff no earlier survivor
/// lies closer than `t_rnn`.
pub fn refine_rnn(points: &[ContactPoint], t_rnn: f64) -> Vec<ContactPoint> {
    if t_rnn <= 0.0 {
        return points.to_vec();
    }
    let cell = |p: &Point| {
        [
            (p.x / t_rnn).floor() as i64,
            (p.y / t_rnn).floor() as i64,
            (p.z / t_rnn).floor() as i64,
        ]
    };
    let mut grid: HashMap<[i64; 3], Vec<Point>> = HashMap::new();
    let mut kept = Vec::new();
    'points: for p in points {
        let k = cell(&p.position);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if bucket.iter().any(|q| (q - p.position).norm() < t_rnn) {
                            continue 'points;
                        }
                    }
                }
            }
        }
        grid.entry(k).or_default().push(p.position);
        kept.push(*p);
    }
    kept
}

/// Per-facet contact sets after both refinements.
pub fn refine_all(facets: &[Facet], contacts: &[Vec<ContactPoint>], t_bdry: f64, t_rnn: f64) -> Vec<Vec<ContactPoint>> {
    facets
        .iter()
        .zip(contacts)
        .map(|(f, pts)| refine_rnn(&refine_boundary(f, pts, t_bdry), t_rnn))
        .collect()
}
