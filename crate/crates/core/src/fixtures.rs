//! Procedurally generated reference objects.
//!
//! These are the meshes the test suites and benchmarks plan against. They are
//! deterministic functions of their arguments so results can be compared
//! byte-for-byte across runs.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::geom::{Point, Vector};
use crate::mesh::TriangleMesh;

fn build(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> TriangleMesh {
    TriangleMesh::new(vertices, triangles).expect("fixture geometry is valid")
}

/// Axis-aligned cube spanning `[0, edge]³` with the usual 8 vertices and 12
/// outward-facing triangles.
pub fn cube(edge: f64) -> TriangleMesh {
    box_mesh(Point::origin(), Point::new(edge, edge, edge))
}

pub fn box_mesh(min: Point, max: Point) -> TriangleMesh {
    let (a, b) = (min, max);
    let vertices = vec![
        Point::new(a.x, a.y, a.z),
        Point::new(b.x, a.y, a.z),
        Point::new(b.x, b.y, a.z),
        Point::new(a.x, b.y, a.z),
        Point::new(a.x, a.y, b.z),
        Point::new(b.x, a.y, b.z),
        Point::new(b.x, b.y, b.z),
        Point::new(a.x, b.y, b.z),
    ];
    let triangles = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    build(vertices, triangles)
}

/// Regular tetrahedron with the given edge length, centered at the origin.
pub fn tetrahedron(edge: f64) -> TriangleMesh {
    let s = edge / (2.0 * 2f64.sqrt());
    let vertices = vec![
        Point::new(s, s, s),
        Point::new(s, -s, -s),
        Point::new(-s, s, -s),
        Point::new(-s, -s, s),
    ];
    build(vertices, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
}

pub fn icosahedron(radius: f64) -> TriangleMesh {
    let (v, t) = icosahedron_raw();
    build(v.into_iter().map(|p| Point::from(p * radius)).collect(), t)
}

fn icosahedron_raw() -> (Vec<Vector>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ];
    let v = raw.iter().map(|&(x, y, z)| Vector::new(x, y, z).normalize()).collect();
    let t = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (v, t)
}

/// Subdivided icosahedron projected onto a sphere: `20 · 4^level` triangles.
pub fn icosphere(radius: f64, level: u32) -> TriangleMesh {
    let (v, t) = icosphere_raw(level);
    build(v.into_iter().map(|p| Point::from(p * radius)).collect(), t)
}

fn icosphere_raw(level: u32) -> (Vec<Vector>, Vec<[usize; 3]>) {
    let (mut v, mut t) = icosahedron_raw();
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(t.len() * 4);
        let mut midpoint = |a: usize, b: usize, v: &mut Vec<Vector>| -> usize {
            let key = if a < b { (a, b) } else { (b, a) };
            *mid.entry(key).or_insert_with(|| {
                v.push(((v[a] + v[b]) * 0.5).normalize());
                v.len() - 1
            })
        };
        for &[a, b, c] in &t {
            let ab = midpoint(a, b, &mut v);
            let bc = midpoint(b, c, &mut v);
            let ca = midpoint(c, a, &mut v);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        t = next;
    }
    (v, t)
}

/// Star-shaped lumpy sphere; an irregular organic test object.
pub fn bumpy_sphere(radius: f64, level: u32) -> TriangleMesh {
    let (v, t) = icosphere_raw(level);
    let vertices = v
        .into_iter()
        .map(|d| {
            let bump = 0.12 * (3.0 * d.x + 1.0).sin() * (2.0 * d.y).cos() + 0.08 * (5.0 * d.z + 0.5 * d.x).sin();
            Point::from(d * radius * (1.0 + bump))
        })
        .collect();
    build(vertices, t)
}

/// Latitude/longitude sphere centered at the origin.
pub fn uv_sphere(radius: f64, n_lon: usize, n_lat: usize) -> TriangleMesh {
    let n_lon = n_lon.max(3);
    let n_lat = n_lat.max(2);
    let mut vertices = vec![Point::new(0.0, 0.0, radius)];
    for i in 1..n_lat {
        let theta = PI * i as f64 / n_lat as f64;
        for j in 0..n_lon {
            let phi = 2.0 * PI * j as f64 / n_lon as f64;
            vertices.push(Point::new(
                radius * theta.sin() * phi.cos(),
                radius * theta.sin() * phi.sin(),
                radius * theta.cos(),
            ));
        }
    }
    vertices.push(Point::new(0.0, 0.0, -radius));
    let south = vertices.len() - 1;
    let ring = |i: usize, j: usize| 1 + (i - 1) * n_lon + (j % n_lon);
    let mut triangles = Vec::new();
    for j in 0..n_lon {
        triangles.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..n_lat - 1 {
        for j in 0..n_lon {
            triangles.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
            triangles.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
        }
    }
    for j in 0..n_lon {
        triangles.push([south, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)]);
    }
    build(vertices, triangles)
}

/// Torus around the y axis through `center`.
pub fn torus(center: Point, major: f64, minor: f64, n_major: usize, n_minor: usize) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(n_major * n_minor);
    for i in 0..n_major {
        let u = 2.0 * PI * i as f64 / n_major as f64;
        for j in 0..n_minor {
            let v = 2.0 * PI * j as f64 / n_minor as f64;
            let r = major + minor * v.cos();
            vertices.push(center + Vector::new(r * u.cos(), minor * v.sin(), r * u.sin()));
        }
    }
    let idx = |i: usize, j: usize| (i % n_major) * n_minor + (j % n_minor);
    let mut triangles = Vec::new();
    for i in 0..n_major {
        for j in 0..n_minor {
            triangles.push([idx(i, j), idx(i, j + 1), idx(i + 1, j + 1)]);
            triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i + 1, j)]);
        }
    }
    build(vertices, triangles)
}

/// Closed cylinder along z from `z = 0` to `z = height`.
pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let profile: Vec<[f64; 2]> = (0..segments)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / segments as f64;
            [radius * a.cos(), radius * a.sin()]
        })
        .collect();
    extrude_polygon(&profile, 0.0, height)
}

/// Extrudes a simple counter-clockwise polygon in the xy plane between two
/// z levels; caps are ear-clipped.
pub fn extrude_polygon(profile: &[[f64; 2]], z0: f64, z1: f64) -> TriangleMesh {
    let n = profile.len();
    let mut vertices = Vec::with_capacity(2 * n);
    for p in profile {
        vertices.push(Point::new(p[0], p[1], z0));
    }
    for p in profile {
        vertices.push(Point::new(p[0], p[1], z1));
    }
    let mut triangles = Vec::new();
    for tri in ear_clip(profile) {
        triangles.push([tri[0], tri[2], tri[1]]);
    }
    for tri in ear_clip(profile) {
        triangles.push([n + tri[0], n + tri[1], n + tri[2]]);
    }
    for i in 0..n {
        let j = (i + 1) % n;
        triangles.push([i, j, n + j]);
        triangles.push([i, n + j, n + i]);
    }
    build(vertices, triangles)
}

fn ear_clip(poly: &[[f64; 2]]) -> Vec<[usize; 3]> {
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut out = Vec::new();
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let (i0, i1, i2) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, c) = (poly[i0], poly[i1], poly[i2]);
            if cross(a, b, c) <= 0.0 {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                j != i0
                    && j != i1
                    && j != i2
                    && cross(a, b, poly[j]) >= 0.0
                    && cross(b, c, poly[j]) >= 0.0
                    && cross(c, a, poly[j]) >= 0.0
            });
            if !blocked {
                out.push([i0, i1, i2]);
                idx.remove(k);
                clipped = true;
                break;
            }
        }
        assert!(clipped, "polygon is not simple and counter-clockwise");
    }
    out.push([idx[0], idx[1], idx[2]]);
    out
}

/// T-shaped prism: a 20 mm wide, 40 mm tall stem under an 80 × 15 mm
/// crossbar, extruded 30 mm along z. The crossbar overhangs the stem's side
/// faces by 30 mm on each side.
pub fn t_shape() -> TriangleMesh {
    let profile = [
        [-10.0, 0.0],
        [10.0, 0.0],
        [10.0, 40.0],
        [40.0, 40.0],
        [40.0, 55.0],
        [-40.0, 55.0],
        [-40.0, 40.0],
        [-10.0, 40.0],
    ];
    extrude_polygon(&profile, 0.0, 30.0)
}

/// Prism whose +x side is a shallow roof: two planes meeting at a ridge at
/// `y = 0` and sloping back by `slope_deg` on either side. The -x side is a
/// flat face at `x = -width/2`, and the ridge sits at `x = width/2`.
pub fn roof_prism(width: f64, half_span: f64, depth: f64, slope_deg: f64) -> TriangleMesh {
    let drop = half_span * slope_deg.to_radians().tan();
    let w = width / 2.0;
    let profile = [
        [-w, -half_span],
        [w - drop, -half_span],
        [w, 0.0],
        [w - drop, half_span],
        [-w, half_span],
    ];
    extrude_polygon(&profile, 0.0, depth)
}

/// Open-top box made of a floor slab and four walls, each a closed box.
/// The interior spans `inner_min..inner_max` in x/y, from the floor top at
/// `inner_min.z` up to `wall_top`.
pub fn open_top_container(inner_min: Point, inner_max: Point, wall: f64, wall_top: f64) -> TriangleMesh {
    let (a, b) = (inner_min, inner_max);
    let parts = [
        box_mesh(
            Point::new(a.x - wall, a.y - wall, a.z - wall),
            Point::new(b.x + wall, b.y + wall, a.z),
        ),
        box_mesh(Point::new(a.x - wall, a.y - wall, a.z), Point::new(a.x, b.y + wall, wall_top)),
        box_mesh(Point::new(b.x, a.y - wall, a.z), Point::new(b.x + wall, b.y + wall, wall_top)),
        box_mesh(Point::new(a.x, a.y - wall, a.z), Point::new(b.x, a.y, wall_top)),
        box_mesh(Point::new(a.x, b.y, a.z), Point::new(b.x, b.y + wall, wall_top)),
    ];
    let refs: Vec<&TriangleMesh> = parts.iter().collect();
    TriangleMesh::merge(&refs).expect("container parts are valid")
}

/// Sphere (radius 40 mm, centered at the origin) with a torus handle
/// sticking out along +x. Triangles of each part that fall inside the other
/// are trimmed, leaving small cracks along the seam. `resolution` scales the
/// tessellation: roughly `6 · resolution²` triangles.
pub fn sphere_with_handle(resolution: usize) -> TriangleMesh {
    let s = resolution.max(4);
    let radius = 40.0;
    let torus_center = Point::new(48.0, 0.0, 0.0);
    let (major, minor) = (22.0, 6.0);
    let sphere = uv_sphere(radius, 2 * s, s);
    let handle = torus(torus_center, major, minor, 2 * s, (s / 2).max(3));

    let inside_sphere = |p: &Point| p.coords.norm() < radius;
    let inside_torus = |p: &Point| {
        let d = p - torus_center;
        let ring = (d.x * d.x + d.z * d.z).sqrt() - major;
        ring * ring + d.y * d.y < minor * minor
    };

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (mesh, inside_other) in [
        (&sphere, &inside_torus as &dyn Fn(&Point) -> bool),
        (&handle, &inside_sphere as &dyn Fn(&Point) -> bool),
    ] {
        let base = vertices.len();
        vertices.extend_from_slice(mesh.vertices());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            if !inside_other(&mesh.triangle_centroid(t)) {
                triangles.push([tri[0] + base, tri[1] + base, tri[2] + base]);
            }
        }
    }
    build(vertices, triangles)
}

/// Resolution parameters for the eight-step mesh-quality series, finest
/// first (about 5000 down to about 200 triangles).
pub const HANDLE_RESOLUTIONS: [usize; 8] = [29, 25, 21, 17, 14, 11, 8, 6];
