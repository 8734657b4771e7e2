//! Indexed triangle meshes.
//!
//! A [`TriangleMesh`] is built once from raw vertex/index buffers, cleaned
//! (vertex welding, degenerate-triangle removal) and then never mutated.
//! Everything downstream (segmentation, sampling, collision) reads the
//! per-face normals, areas and edge adjacency computed here.

mod io;

use std::collections::HashMap;

use nalgebra::Isometry3;
use serde::{Deserialize, Serialize};

use crate::geom::{self, Aabb, Point, Vector};

pub use io::{load_mesh, read_obj, read_stl, write_obj, write_stl_ascii, write_stl_binary, MeshFormat};

/// Vertices closer than this are merged on construction (mm).
pub const WELD_TOLERANCE: f64 = 1e-6;
/// Triangles with a smaller area are dropped as degenerate (mm²).
pub const DEGENERATE_AREA: f64 = 1e-12;
/// Minimum ray parameter accepted as a hit (mm).
pub const RAY_EPSILON: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("i/o error reading {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("mesh has no valid triangles")]
    Empty,
    #[error("triangle {triangle} references vertex {vertex} but only {count} vertices exist")]
    InvalidIndex {
        triangle: usize,
        vertex: usize,
        count: usize,
    },
    #[error("ray direction must be finite and non-zero")]
    InvalidRay,
}

/// Non-fatal findings from mesh construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MeshWarning {
    DegenerateDropped { count: usize },
    NotWatertight { open_edges: usize, non_manifold_edges: usize },
    /// The signed volume was not usable; `com` is the surface centroid.
    SurfaceCentroidFallback { volume: f64 },
}

impl std::fmt::Display for MeshWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeshWarning::DegenerateDropped { count } => write!(f, "dropped {count} degenerate triangle(s)"),
            MeshWarning::NotWatertight {
                open_edges,
                non_manifold_edges,
            } => write!(
                f,
                "mesh is not watertight: {open_edges} open edge(s), {non_manifold_edges} non-manifold edge(s)"
            ),
            MeshWarning::SurfaceCentroidFallback { volume } => {
                write!(f, "signed volume {volume:.3e} unusable, using surface centroid as center of mass")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    face_normals: Vec<Vector>,
    face_areas: Vec<f64>,
    adjacency: Vec<Vec<usize>>,
    com: Point,
    volume: f64,
    bounds: Aabb,
    warnings: Vec<MeshWarning>,
}

impl TriangleMesh {
    /// Builds a cleaned mesh: welds vertices within [`WELD_TOLERANCE`], drops
    /// zero-area triangles and unreferenced vertices, then computes normals,
    /// areas, adjacency and center of mass.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(MeshError::InvalidIndex {
                        triangle: t,
                        vertex: v,
                        count: vertices.len(),
                    });
                }
            }
        }

        let (welded, remap) = weld_vertices(&vertices, WELD_TOLERANCE);
        let mut warnings = Vec::new();
        let mut kept = Vec::with_capacity(triangles.len());
        let mut dropped = 0;
        for tri in &triangles {
            let t = [remap[tri[0]], remap[tri[1]], remap[tri[2]]];
            let degenerate = t[0] == t[1]
                || t[1] == t[2]
                || t[0] == t[2]
                || 0.5 * (welded[t[1]] - welded[t[0]]).cross(&(welded[t[2]] - welded[t[0]])).norm()
                    < DEGENERATE_AREA;
            if degenerate {
                dropped += 1;
            } else {
                kept.push(t);
            }
        }
        if kept.is_empty() {
            return Err(MeshError::Empty);
        }
        if dropped > 0 {
            warnings.push(MeshWarning::DegenerateDropped { count: dropped });
        }

        // Compact to referenced vertices, preserving index order.
        let mut referenced = vec![false; welded.len()];
        for tri in &kept {
            for &v in tri {
                referenced[v] = true;
            }
        }
        let mut used = vec![usize::MAX; welded.len()];
        let mut verts = Vec::new();
        for (i, v) in welded.iter().enumerate() {
            if referenced[i] {
                used[i] = verts.len();
                verts.push(*v);
            }
        }
        let tris: Vec<[usize; 3]> = kept.iter().map(|t| [used[t[0]], used[t[1]], used[t[2]]]).collect();

        Ok(Self::from_clean(verts, tris, warnings))
    }

    fn from_clean(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, mut warnings: Vec<MeshWarning>) -> Self {
        let mut face_normals = Vec::with_capacity(triangles.len());
        let mut face_areas = Vec::with_capacity(triangles.len());
        for t in &triangles {
            let n = (vertices[t[1]] - vertices[t[0]]).cross(&(vertices[t[2]] - vertices[t[0]]));
            let len = n.norm();
            face_areas.push(0.5 * len);
            face_normals.push(n / len);
        }

        let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (ti, t) in triangles.iter().enumerate() {
            for k in 0..3 {
                edges.entry(edge_key(t[k], t[(k + 1) % 3])).or_default().push(ti);
            }
        }
        let mut adjacency = vec![Vec::new(); triangles.len()];
        let mut open_edges = 0;
        let mut non_manifold_edges = 0;
        for tris in edges.values() {
            match tris.len() {
                1 => open_edges += 1,
                2 => {}
                _ => non_manifold_edges += 1,
            }
            for &a in tris {
                for &b in tris {
                    if a != b {
                        adjacency[a].push(b);
                    }
                }
            }
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
        }
        if open_edges > 0 || non_manifold_edges > 0 {
            warnings.push(MeshWarning::NotWatertight {
                open_edges,
                non_manifold_edges,
            });
        }

        let bounds = Aabb::from_points(&vertices);
        let (volume, volume_com) = signed_volume_and_centroid(&vertices, &triangles);
        let scale = bounds.diagonal().max(f64::MIN_POSITIVE);
        let com = if volume > 1e-9 * scale.powi(3) {
            volume_com
        } else {
            warnings.push(MeshWarning::SurfaceCentroidFallback { volume });
            surface_centroid(&vertices, &triangles, &face_areas)
        };

        Self {
            vertices,
            triangles,
            face_normals,
            face_areas,
            adjacency,
            com,
            volume,
            bounds,
            warnings,
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn face_normal(&self, t: usize) -> Vector {
        self.face_normals[t]
    }

    pub fn face_normals(&self) -> &[Vector] {
        &self.face_normals
    }

    pub fn face_area(&self, t: usize) -> f64 {
        self.face_areas[t]
    }

    pub fn face_areas(&self) -> &[f64] {
        &self.face_areas
    }

    pub fn total_area(&self) -> f64 {
        self.face_areas.iter().sum()
    }

    /// Edge-adjacent triangles of `t`, ascending.
    pub fn neighbors(&self, t: usize) -> &[usize] {
        &self.adjacency[t]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    /// Center of mass assuming uniform density.
    pub fn com(&self) -> Point {
        self.com
    }

    /// Signed enclosed volume (mm³); positive for outward-oriented closed meshes.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn warnings(&self) -> &[MeshWarning] {
        &self.warnings
    }

    pub fn is_watertight(&self) -> bool {
        !self.warnings.iter().any(|w| matches!(w, MeshWarning::NotWatertight { .. }))
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangle_points(t);
        geom::triangle_centroid(&a, &b, &c)
    }

    /// Nearest hit over every triangle.
    pub fn ray_cast(&self, ray: &Ray) -> Option<RayHit> {
        self.ray_cast_triangles(0..self.triangles.len(), ray)
    }

    /// Nearest hit over the given triangles; ties go to the first listed.
    pub fn ray_cast_triangles(&self, triangles: impl IntoIterator<Item = usize>, ray: &Ray) -> Option<RayHit> {
        let mut best: Option<RayHit> = None;
        for t in triangles {
            let [a, b, c] = self.triangle_points(t);
            if let Some((dist, _, _)) = geom::ray_triangle(&ray.origin, &ray.direction, &a, &b, &c, RAY_EPSILON) {
                if best.as_ref().is_none_or(|h| dist < h.distance) {
                    best = Some(RayHit {
                        point: ray.at(dist),
                        triangle: t,
                        distance: dist,
                    });
                }
            }
        }
        best
    }

    /// Copy with every vertex moved by `pose`.
    pub fn transformed(&self, pose: &Isometry3<f64>) -> TriangleMesh {
        let vertices = self.vertices.iter().map(|v| pose * v).collect();
        Self::from_clean(vertices, self.triangles.clone(), Vec::new())
    }

    /// Mirror image across the plane through the origin with normal `axis`;
    /// triangle winding is flipped so normals stay outward.
    pub fn mirrored(&self, axis: &Vector) -> TriangleMesh {
        let n = axis.normalize();
        let vertices = self.vertices.iter().map(|v| v - n * (2.0 * n.dot(&v.coords))).collect();
        let triangles = self.triangles.iter().map(|t| [t[0], t[2], t[1]]).collect();
        Self::from_clean(vertices, triangles, Vec::new())
    }

    /// Disjoint union of several meshes, in order.
    pub fn merge(parts: &[&TriangleMesh]) -> Result<TriangleMesh, MeshError> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for part in parts {
            let base = vertices.len();
            vertices.extend_from_slice(&part.vertices);
            triangles.extend(part.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        }
        TriangleMesh::new(vertices, triangles)
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Sorted vertex pair identifying an undirected edge.
pub fn undirected_edge(a: usize, b: usize) -> (usize, usize) {
    edge_key(a, b)
}

fn weld_vertices(vertices: &[Point], tol: f64) -> (Vec<Point>, Vec<usize>) {
    let cell = |p: &Point| -> [i64; 3] {
        [
            (p.x / tol).floor() as i64,
            (p.y / tol).floor() as i64,
            (p.z / tol).floor() as i64,
        ]
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut out: Vec<Point> = Vec::new();
    let mut remap = Vec::with_capacity(vertices.len());
    for v in vertices {
        let c = cell(v);
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &i in list {
                            if (out[i] - v).norm() <= tol {
                                found = Some(i);
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        let idx = match found {
            Some(i) => i,
            None => {
                out.push(*v);
                grid.entry(c).or_default().push(out.len() - 1);
                out.len() - 1
            }
        };
        remap.push(idx);
    }
    (out, remap)
}

fn signed_volume_and_centroid(vertices: &[Point], triangles: &[[usize; 3]]) -> (f64, Point) {
    // Tetrahedra against a reference point near the mesh keep cancellation low.
    let origin = vertices[triangles[0][0]].coords;
    let mut volume = 0.0;
    let mut moment = Vector::zeros();
    for t in triangles {
        let a = vertices[t[0]].coords - origin;
        let b = vertices[t[1]].coords - origin;
        let c = vertices[t[2]].coords - origin;
        let v = a.dot(&b.cross(&c)) / 6.0;
        volume += v;
        moment += (a + b + c) * (v / 4.0);
    }
    if volume != 0.0 {
        (volume, Point::from(moment / volume + origin))
    } else {
        (0.0, Point::from(origin))
    }
}

fn surface_centroid(vertices: &[Point], triangles: &[[usize; 3]], areas: &[f64]) -> Point {
    let mut acc = Vector::zeros();
    let mut total = 0.0;
    for (t, &area) in triangles.iter().zip(areas) {
        acc += geom::triangle_centroid(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]).coords * area;
        total += area;
    }
    Point::from(acc / total)
}

/// Half-line with a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Point,
    pub direction: Vector,
}

impl Ray {
    /// Normalizes `direction`; fails on zero or non-finite input.
    pub fn new(origin: Point, direction: Vector) -> Result<Self, MeshError> {
        let len = direction.norm();
        if !len.is_finite() || len == 0.0 {
            return Err(MeshError::InvalidRay);
        }
        Ok(Self {
            origin,
            direction: direction / len,
        })
    }

    pub fn at(&self, t: f64) -> Point {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub point: Point,
    pub triangle: usize,
    pub distance: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn unit_cube_com_and_faces() {
        let cube = fixtures::cube(1.0);
        assert_eq!(cube.len(), 12);
        assert_eq!(cube.vertices().len(), 8);
        assert!((cube.com() - Point::new(0.5, 0.5, 0.5)).norm() < 1e-12);
        assert!((cube.volume() - 1.0).abs() < 1e-12);
        assert!(cube.is_watertight());
        assert!(cube.warnings().is_empty());
    }

    #[test]
    fn duplicated_vertices_are_welded() {
        let cube = fixtures::cube(1.0);
        let mut verts = Vec::new();
        let mut tris = Vec::new();
        for t in cube.triangles() {
            let base = verts.len();
            for &v in t {
                verts.push(cube.vertices()[v]);
            }
            tris.push([base, base + 1, base + 2]);
        }
        assert_eq!(verts.len(), 36);
        let welded = TriangleMesh::new(verts, tris).unwrap();
        assert_eq!(welded.vertices().len(), 8);
        assert_eq!(welded.len(), 12);
        assert!(welded.is_watertight());
    }

    #[test]
    fn zero_area_triangle_is_dropped_with_warning() {
        let cube = fixtures::cube(1.0);
        let mut verts = cube.vertices().to_vec();
        let mut tris = cube.triangles().to_vec();
        verts.push(Point::new(0.5, 0.0, 0.0));
        // Collinear sliver along the bottom front edge, replacing one face.
        tris[0] = [0, 1, verts.len() - 1];
        let mesh = TriangleMesh::new(verts, tris).unwrap();
        assert_eq!(mesh.len(), 11);
        assert!(mesh
            .warnings()
            .iter()
            .any(|w| matches!(w, MeshWarning::DegenerateDropped { count: 1 })));
        assert!(!mesh.is_watertight());
    }

    #[test]
    fn empty_and_invalid_inputs() {
        assert!(matches!(TriangleMesh::new(vec![], vec![]), Err(MeshError::Empty)));
        let v = vec![Point::origin(), Point::new(1.0, 0.0, 0.0)];
        assert!(matches!(
            TriangleMesh::new(v, vec![[0, 1, 2]]),
            Err(MeshError::InvalidIndex { vertex: 2, .. })
        ));
    }

    #[test]
    fn normals_are_unit_and_outward() {
        let cube = fixtures::cube(2.0);
        for t in 0..cube.len() {
            let n = cube.face_normal(t);
            assert!((n.norm() - 1.0).abs() < 1e-9);
            let outward = cube.triangle_centroid(t) - cube.com();
            assert!(n.dot(&outward) > 0.0);
        }
    }

    #[test]
    fn adjacency_is_symmetric() {
        let mesh = fixtures::icosphere(10.0, 2);
        for t in 0..mesh.len() {
            assert_eq!(mesh.neighbors(t).len(), 3);
            for &n in mesh.neighbors(t) {
                assert!(mesh.neighbors(n).contains(&t));
            }
        }
    }

    #[test]
    fn open_surface_falls_back_to_surface_centroid() {
        let verts = vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(2.0, 0.0, 0.0),
            Point::new(2.0, 2.0, 0.0),
            Point::new(0.0, 2.0, 0.0),
        ];
        let mesh = TriangleMesh::new(verts, vec![[0, 1, 2], [0, 2, 3]]).unwrap();
        assert!(!mesh.is_watertight());
        assert!((mesh.com() - Point::new(1.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn ray_cast_axis_aligned() {
        let cube = fixtures::cube(1.0);
        let ray = Ray::new(Point::new(0.5, 0.5, -1.0), Vector::z()).unwrap();
        let hit = cube.ray_cast(&ray).unwrap();
        assert!((hit.point - Point::new(0.5, 0.5, 0.0)).norm() < 1e-12);
        assert!((hit.distance - 1.0).abs() < 1e-12);

        let out = Ray::new(Point::new(0.5, 0.5, 0.0), -Vector::z()).unwrap();
        assert!(cube.ray_cast(&out).is_none());
        assert!(Ray::new(Point::origin(), Vector::zeros()).is_err());
    }

    #[test]
    fn mirrored_mesh_keeps_outward_normals() {
        let mesh = fixtures::t_shape();
        let m = mesh.mirrored(&Vector::x());
        assert!((m.volume() - mesh.volume()).abs() < 1e-6 * mesh.volume());
        assert!((m.com().x + mesh.com().x).abs() < 1e-9);
    }
}
