//! Bounding-volume hierarchies and the mesh/mesh and capsule/mesh tests.

use std::borrow::Cow;
use std::cmp::Ordering;

use nalgebra::Isometry3;

use crate::geom::{ray_triangle, segment_hits_triangle, segment_triangle_distance, tri_tri_intersect, Aabb, Point, Vector};
use crate::mesh::TriangleMesh;

pub const DEFAULT_LEAF_SIZE: usize = 4;

/// Padding applied to transformed node boxes so rounding in the corner
/// transform never prunes a touching pair.
const BOX_PAD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
enum NodeKind {
    Leaf { start: usize, end: usize },
    Inner { left: usize, right: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    bounds: Aabb,
    kind: NodeKind,
}

/// Median-split AABB tree over triangle indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
    leaf_size: usize,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh, leaf_size: usize) -> Self {
        let leaf_size = leaf_size.max(1);
        let centroids: Vec<Point> = (0..mesh.len()).map(|t| mesh.triangle_centroid(t)).collect();
        let mut bvh = Bvh {
            nodes: Vec::with_capacity(2 * mesh.len() / leaf_size + 1),
            order: (0..mesh.len()).collect(),
            leaf_size,
        };
        if !mesh.is_empty() {
            bvh.build_node(mesh, &centroids, 0, mesh.len());
        }
        bvh
    }

    fn build_node(&mut self, mesh: &TriangleMesh, centroids: &[Point], start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        for &t in &self.order[start..end] {
            for p in &mesh.triangle_points(t) {
                bounds.grow(p);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            bounds,
            kind: NodeKind::Leaf { start, end },
        });
        if end - start <= self.leaf_size {
            return id;
        }
        let mut cbox = Aabb::empty();
        for &t in &self.order[start..end] {
            cbox.grow(&centroids[t]);
        }
        let ext = cbox.extent();
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        self.order[start..end].sort_by(|&a, &b| {
            centroids[a][axis]
                .partial_cmp(&centroids[b][axis])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mid = start + (end - start) / 2;
        let left = self.build_node(mesh, centroids, start, mid);
        let right = self.build_node(mesh, centroids, mid, end);
        self.nodes[id].kind = NodeKind::Inner { left, right };
        id
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn root_bounds(&self) -> Option<Aabb> {
        self.nodes.first().map(|n| n.bounds)
    }

    /// Triangle lists of all leaves, in tree order.
    pub fn leaves(&self) -> Vec<&[usize]> {
        self.nodes
            .iter()
            .filter_map(|n| match n.kind {
                NodeKind::Leaf { start, end } => Some(&self.order[start..end]),
                NodeKind::Inner { .. } => None,
            })
            .collect()
    }

    /// Checks that every node box contains its descendants' vertices.
    pub fn validate(&self, mesh: &TriangleMesh) -> bool {
        self.nodes.iter().all(|n| {
            let (start, end) = self.range(n);
            self.order[start..end]
                .iter()
                .all(|&t| mesh.triangle_points(t).iter().all(|p| n.bounds.contains(p)))
        })
    }

    fn range(&self, n: &Node) -> (usize, usize) {
        match n.kind {
            NodeKind::Leaf { start, end } => (start, end),
            NodeKind::Inner { left, right } => {
                let (s, _) = self.range(&self.nodes[left]);
                let (_, e) = self.range(&self.nodes[right]);
                (s, e)
            }
        }
    }
}

/// A mesh with its prebuilt hierarchy.
#[derive(Debug, Clone)]
pub struct CollisionMesh {
    pub mesh: TriangleMesh,
    pub bvh: Bvh,
}

impl CollisionMesh {
    pub fn new(mesh: TriangleMesh) -> Self {
        let bvh = Bvh::build(&mesh, DEFAULT_LEAF_SIZE);
        Self { mesh, bvh }
    }
}

impl From<TriangleMesh> for CollisionMesh {
    fn from(mesh: TriangleMesh) -> Self {
        Self::new(mesh)
    }
}

/// Segment with a radius: all points within `radius` of `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub a: Point,
    pub b: Point,
    pub radius: f64,
}

impl Capsule {
    pub fn new(a: Point, b: Point, radius: f64) -> Self {
        assert!(radius >= 0.0, "capsule radius must be non-negative");
        Self { a, b, radius }
    }
}

/// Mesh vertices in the world frame.
pub fn world_vertices<'a>(mesh: &'a TriangleMesh, pose: &Isometry3<f64>) -> Cow<'a, [Point]> {
    if *pose == Isometry3::identity() {
        Cow::Borrowed(mesh.vertices())
    } else {
        Cow::Owned(mesh.vertices().iter().map(|p| pose * p).collect())
    }
}

pub fn world_triangle(mesh: &TriangleMesh, verts: &[Point], t: usize) -> [Point; 3] {
    let [i, j, k] = mesh.triangles()[t];
    [verts[i], verts[j], verts[k]]
}

/// Order-independent triangle/triangle test: the lexicographically smaller
/// triangle is always passed first so swapping the meshes cannot change a
/// borderline verdict.
pub fn triangles_intersect(x: &[Point; 3], y: &[Point; 3]) -> bool {
    let key = |t: &[Point; 3]| [t[0].x, t[0].y, t[0].z, t[1].x, t[1].y, t[1].z, t[2].x, t[2].y, t[2].z];
    let (kx, ky) = (key(x), key(y));
    let first_x = kx.iter().zip(&ky).find_map(|(a, b)| match a.total_cmp(b) {
        Ordering::Equal => None,
        o => Some(o == Ordering::Less),
    });
    if first_x.unwrap_or(true) {
        tri_tri_intersect(x, y)
    } else {
        tri_tri_intersect(y, x)
    }
}

/// Whether the surfaces of the two posed meshes intersect.
pub fn check_collision(a: &CollisionMesh, pose_a: &Isometry3<f64>, b: &CollisionMesh, pose_b: &Isometry3<f64>) -> bool {
    if a.bvh.nodes.is_empty() || b.bvh.nodes.is_empty() {
        return false;
    }
    let va = world_vertices(&a.mesh, pose_a);
    let vb = world_vertices(&b.mesh, pose_b);
    let box_a = |n: &Node| n.bounds.transformed(pose_a).inflate(BOX_PAD);
    let box_b = |n: &Node| n.bounds.transformed(pose_b).inflate(BOX_PAD);
    let mut stack = vec![(0usize, 0usize)];
    while let Some((ia, ib)) = stack.pop() {
        let (na, nb) = (&a.bvh.nodes[ia], &b.bvh.nodes[ib]);
        let (ba, bb) = (box_a(na), box_b(nb));
        if !ba.overlaps(&bb) {
            continue;
        }
        match (na.kind, nb.kind) {
            (NodeKind::Leaf { start: sa, end: ea }, NodeKind::Leaf { start: sb, end: eb }) => {
                for &ta in &a.bvh.order[sa..ea] {
                    let tri_a = world_triangle(&a.mesh, &va, ta);
                    let tb_box = Aabb::from_points(&tri_a);
                    for &tb in &b.bvh.order[sb..eb] {
                        let tri_b = world_triangle(&b.mesh, &vb, tb);
                        if tb_box.overlaps(&Aabb::from_points(&tri_b)) && triangles_intersect(&tri_a, &tri_b) {
                            return true;
                        }
                    }
                }
            }
            (NodeKind::Inner { left, right }, NodeKind::Leaf { .. }) => {
                stack.push((right, ib));
                stack.push((left, ib));
            }
            (NodeKind::Leaf { .. }, NodeKind::Inner { left, right }) => {
                stack.push((ia, right));
                stack.push((ia, left));
            }
            (NodeKind::Inner { left: la, right: ra }, NodeKind::Inner { left: lb, right: rb }) => {
                if ba.diagonal() >= bb.diagonal() {
                    stack.push((ra, ib));
                    stack.push((la, ib));
                } else {
                    stack.push((ia, rb));
                    stack.push((ia, lb));
                }
            }
        }
    }
    false
}

/// Capsule/triangle verdict used by [`check_capsule`].
pub fn capsule_hits_triangle(capsule: &Capsule, tri: &[Point; 3]) -> bool {
    let [x, y, z] = tri;
    segment_hits_triangle(&capsule.a, &capsule.b, x, y, z)
        || segment_triangle_distance(&capsule.a, &capsule.b, x, y, z) < capsule.radius
}

/// Whether any triangle of the posed mesh lies within the capsule.
pub fn check_capsule(capsule: &Capsule, mesh: &CollisionMesh, pose: &Isometry3<f64>) -> bool {
    if mesh.bvh.nodes.is_empty() {
        return false;
    }
    let verts = world_vertices(&mesh.mesh, pose);
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        let node = &mesh.bvh.nodes[i];
        let bounds = node.bounds.transformed(pose).inflate(capsule.radius + BOX_PAD);
        if !bounds.intersects_segment(&capsule.a, &capsule.b) {
            continue;
        }
        match node.kind {
            NodeKind::Leaf { start, end } => {
                for &t in &mesh.bvh.order[start..end] {
                    if capsule_hits_triangle(capsule, &world_triangle(&mesh.mesh, &verts, t)) {
                        return true;
                    }
                }
            }
            NodeKind::Inner { left, right } => {
                stack.push(right);
                stack.push(left);
            }
        }
    }
    false
}

/// Distance from `p` to the nearest surface crossing of the line through `p`
/// along `dir` (either direction), or `None` if the line misses the mesh.
pub fn line_gap(mesh: &CollisionMesh, pose: &Isometry3<f64>, p: &Point, dir: &Vector) -> Option<f64> {
    if mesh.bvh.nodes.is_empty() {
        return None;
    }
    let verts = world_vertices(&mesh.mesh, pose);
    let mut best: Option<f64> = None;
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        let node = &mesh.bvh.nodes[i];
        let bounds = node.bounds.transformed(pose).inflate(BOX_PAD);
        let Some((lo, hi)) = bounds.ray_interval(p, dir, f64::NEG_INFINITY, f64::INFINITY) else {
            continue;
        };
        if let Some(b) = best {
            if lo > b || hi < -b {
                continue;
            }
        }
        match node.kind {
            NodeKind::Leaf { start, end } => {
                for &t in &mesh.bvh.order[start..end] {
                    let [a, b, c] = world_triangle(&mesh.mesh, &verts, t);
                    if let Some((s, _, _)) = ray_triangle(p, dir, &a, &b, &c, f64::NEG_INFINITY) {
                        best = Some(best.map_or(s.abs(), |g| g.min(s.abs())));
                    }
                }
            }
            NodeKind::Inner { left, right } => {
                stack.push(right);
                stack.push(left);
            }
        }
    }
    best
}
