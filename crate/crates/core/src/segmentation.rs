//! Superimposed segmentation: overlapping clusters of near-coplanar triangles.
//!
//! Each facet is region-grown from a seed triangle, admitting edge neighbours
//! whose normal lies within `theta_pln` of the seed normal. New seeds are
//! promoted from triangles whose normal is more than `theta_fct` away from
//! every previous seed that can reach them through triangles within
//! `theta_fct` of its own normal. A triangle may end up in several facets.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::geom::{angle_between, Point, Vector};
use crate::mesh::{undirected_edge, Ray, RayHit, TriangleMesh};

/// Slack on angle comparisons so that exactly coplanar triangles compare
/// equal despite rounding in their normals.
pub const ANGLE_EPS: f64 = 1e-7;

/// Where the next seed is searched for once a facet is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedScan {
    /// Every triangle edge-reachable from an existing facet member.
    #[default]
    Reachable,
    /// Only the edge neighbours of existing seed triangles.
    OneRing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentParams {
    /// Radians.
    pub theta_pln: f64,
    /// Radians.
    pub theta_fct: f64,
    pub seed_scan: SeedScan,
}

impl SegmentParams {
    pub fn new(theta_pln: f64, theta_fct: f64) -> Self {
        Self {
            theta_pln,
            theta_fct,
            seed_scan: SeedScan::Reachable,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeSegment {
    pub a: Point,
    pub b: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Facet {
    pub seed_triangle: usize,
    /// Member triangle indices, ascending.
    pub members: Vec<usize>,
    /// Area-weighted mean of member normals, renormalized.
    pub avg_normal: Vector,
    pub boundary_edges: Vec<EdgeSegment>,
    pub area: f64,
    /// Contact curvature radius (mm); set by
    /// [`crate::stability::assign_curvature_radii`].
    pub curvature_radius: Option<f64>,
}

impl Facet {
    pub fn contains(&self, triangle: usize) -> bool {
        self.members.binary_search(&triangle).is_ok()
    }

    /// Nearest ray hit restricted to this facet's triangles.
    pub fn ray_cast(&self, mesh: &TriangleMesh, ray: &Ray) -> Option<RayHit> {
        mesh.ray_cast_triangles(self.members.iter().copied(), ray)
    }
}

/// Segments `mesh` into superimposed facets. Deterministic: the first seed is
/// triangle 0, neighbours are visited in ascending index order and the next
/// seed is the lowest-index qualifying triangle.
pub fn segment(mesh: &TriangleMesh, params: &SegmentParams) -> Vec<Facet> {
    let n = mesh.len();
    if n == 0 {
        return Vec::new();
    }
    // A seed blocks the triangles reachable from it through triangles within
    // theta_fct of its normal; those can never become seeds. Disconnected
    // regions facing the same way (both ends of a T, separate parts) get
    // their own seeds.
    let mut blocked = vec![false; n];
    let mut seeds: Vec<usize> = Vec::new();
    let mut facets = Vec::new();

    let mut next_seed = Some(0);
    while let Some(seed) = next_seed {
        seeds.push(seed);
        for t in flood(mesh, seed, params.theta_fct) {
            blocked[t] = true;
        }

        let members = flood(mesh, seed, params.theta_pln);
        facets.push(build_facet(mesh, seed, members));

        next_seed = match params.seed_scan {
            SeedScan::Reachable => (0..n).find(|&t| !blocked[t]),
            SeedScan::OneRing => {
                let mut ring: Vec<usize> = seeds
                    .iter()
                    .flat_map(|&s| mesh.neighbors(s).iter().copied())
                    .filter(|&t| !blocked[t])
                    .collect();
                ring.sort_unstable();
                ring.first().copied()
            }
        };
    }
    facets
}

/// Breadth-first region of edge neighbours whose normal is within `theta` of
/// the seed normal, sorted.
fn flood(mesh: &TriangleMesh, seed: usize, theta: f64) -> Vec<usize> {
    let seed_normal = mesh.face_normal(seed);
    let mut visited = vec![false; mesh.len()];
    visited[seed] = true;
    let mut queue = VecDeque::from([seed]);
    let mut members = vec![seed];
    while let Some(t) = queue.pop_front() {
        for &nb in mesh.neighbors(t) {
            if visited[nb] {
                continue;
            }
            if angle_between(&mesh.face_normal(nb), &seed_normal) <= theta + ANGLE_EPS {
                visited[nb] = true;
                members.push(nb);
                queue.push_back(nb);
            }
        }
    }
    members.sort_unstable();
    members
}

fn build_facet(mesh: &TriangleMesh, seed: usize, members: Vec<usize>) -> Facet {
    let mut weighted = Vector::zeros();
    let mut area = 0.0;
    let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edge_order = Vec::new();
    for &t in &members {
        weighted += mesh.face_normal(t) * mesh.face_area(t);
        area += mesh.face_area(t);
        let tri = mesh.triangles()[t];
        for k in 0..3 {
            let e = undirected_edge(tri[k], tri[(k + 1) % 3]);
            let c = edge_count.entry(e).or_insert(0);
            if *c == 0 {
                edge_order.push(e);
            }
            *c += 1;
        }
    }
    let avg_normal = weighted
        .try_normalize(1e-300)
        .unwrap_or_else(|| mesh.face_normal(seed));
    let verts = mesh.vertices();
    let boundary_edges = edge_order
        .into_iter()
        .filter(|e| edge_count[e] == 1)
        .map(|(a, b)| EdgeSegment {
            a: verts[a],
            b: verts[b],
        })
        .collect();
    Facet {
        seed_triangle: seed,
        members,
        avg_normal,
        boundary_edges,
        area,
        curvature_radius: None,
    }
}

/// For each triangle, the facets that contain it (ascending facet index).
pub fn triangle_to_facets(facets: &[Facet], triangle_count: usize) -> Vec<Vec<usize>> {
    let mut map = vec![Vec::new(); triangle_count];
    for (fi, f) in facets.iter().enumerate() {
        for &t in &f.members {
            map[t].push(fi);
        }
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    #[test]
    fn cube_gives_one_facet_per_face() {
        let cube = fixtures::cube(1.0);
        let facets = segment(&cube, &SegmentParams::new(deg(20.0), deg(20.0)));
        assert_eq!(facets.len(), 6);
        for f in &facets {
            assert_eq!(f.members.len(), 2);
            assert!(f.contains(f.seed_triangle));
            assert_eq!(f.boundary_edges.len(), 4);
            assert!((f.area - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_planarity_on_icosahedron_is_one_facet_per_triangle() {
        let ico = fixtures::icosahedron(10.0);
        let facets = segment(&ico, &SegmentParams::new(0.0, deg(20.0)));
        assert_eq!(facets.len(), 20);
        assert!(facets.iter().all(|f| f.members == vec![f.seed_triangle]));
    }

    #[test]
    fn zero_planarity_keeps_exactly_coplanar_neighbours() {
        let cube = fixtures::cube(3.0);
        let facets = segment(&cube, &SegmentParams::new(0.0, deg(20.0)));
        assert_eq!(facets.len(), 6);
        assert!(facets.iter().all(|f| f.members.len() == 2));
    }

    #[test]
    fn icosphere_coverage_and_planarity() {
        let mesh = fixtures::icosphere(50.0, 2);
        let params = SegmentParams::new(deg(20.0), deg(20.0));
        let facets = segment(&mesh, &params);
        let owners = triangle_to_facets(&facets, mesh.len());
        assert!(owners.iter().all(|o| !o.is_empty()));
        for f in &facets {
            let sn = mesh.face_normal(f.seed_triangle);
            for &m in &f.members {
                assert!(angle_between(&mesh.face_normal(m), &sn) <= params.theta_pln + ANGLE_EPS);
            }
        }
        // Superimposed: some triangle sits in more than one facet.
        assert!(owners.iter().any(|o| o.len() > 1));
    }

    #[test]
    fn seeds_are_separated_from_every_seed_that_reaches_them() {
        let mesh = fixtures::bumpy_sphere(30.0, 2);
        let params = SegmentParams::new(deg(15.0), deg(25.0));
        let facets = segment(&mesh, &params);
        for (i, a) in facets.iter().enumerate() {
            let reach = flood(&mesh, a.seed_triangle, params.theta_fct);
            for b in &facets[i + 1..] {
                assert!(reach.binary_search(&b.seed_triangle).is_err());
            }
        }
        let convex = fixtures::icosphere(30.0, 3);
        let facets = segment(&convex, &params);
        for (i, a) in facets.iter().enumerate() {
            for b in &facets[i + 1..] {
                let ang = angle_between(&convex.face_normal(a.seed_triangle), &convex.face_normal(b.seed_triangle));
                assert!(ang > params.theta_fct);
            }
        }
    }

    #[test]
    fn t_shape_faces_facing_the_same_way_are_both_covered() {
        let mesh = fixtures::t_shape();
        let facets = segment(&mesh, &SegmentParams::new(deg(20.0), deg(20.0)));
        let owners = triangle_to_facets(&facets, mesh.len());
        assert!(owners.iter().all(|o| o.len() == 1));
        // Two caps, bottom, top, two crossbar undersides, two stem sides and
        // two crossbar ends.
        assert_eq!(facets.len(), 10);
    }

    #[test]
    fn boundary_edges_have_one_member_triangle() {
        let mesh = fixtures::icosphere(20.0, 2);
        let facets = segment(&mesh, &SegmentParams::new(deg(20.0), deg(20.0)));
        for f in &facets {
            for e in &f.boundary_edges {
                let incident = f
                    .members
                    .iter()
                    .filter(|&&t| {
                        let p = mesh.triangle_points(t);
                        p.contains(&e.a) && p.contains(&e.b)
                    })
                    .count();
                assert_eq!(incident, 1);
            }
        }
    }

    #[test]
    fn members_are_edge_connected() {
        let mesh = fixtures::bumpy_sphere(30.0, 2);
        let facets = segment(&mesh, &SegmentParams::new(deg(25.0), deg(20.0)));
        for f in &facets {
            let mut seen = vec![f.seed_triangle];
            let mut stack = vec![f.seed_triangle];
            while let Some(t) = stack.pop() {
                for &nb in mesh.neighbors(t) {
                    if f.contains(nb) && !seen.contains(&nb) {
                        seen.push(nb);
                        stack.push(nb);
                    }
                }
            }
            assert_eq!(seen.len(), f.members.len());
        }
    }

    #[test]
    fn one_ring_scan_finds_no_more_seeds_than_reachable() {
        let mesh = fixtures::icosphere(20.0, 2);
        let mut params = SegmentParams::new(deg(20.0), deg(20.0));
        let reachable = segment(&mesh, &params).len();
        params.seed_scan = SeedScan::OneRing;
        let ring = segment(&mesh, &params).len();
        assert!(ring >= 1 && ring <= reachable);
    }

    #[test]
    fn disconnected_parts_are_all_segmented() {
        let a = fixtures::cube(10.0);
        let b = a.transformed(&nalgebra::Isometry3::translation(50.0, 0.0, 0.0));
        let both = TriangleMesh::merge(&[&a, &b]).unwrap();
        let facets = segment(&both, &SegmentParams::new(deg(20.0), deg(20.0)));
        let owners = triangle_to_facets(&facets, both.len());
        assert_eq!(facets.len(), 12);
        assert!(owners.iter().all(|o| o.len() == 1));
        assert!(facets[..6].iter().all(|f| f.seed_triangle < 12));
        assert!(facets[6..].iter().all(|f| f.seed_triangle >= 12));
    }
}
