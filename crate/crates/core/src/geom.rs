//! Low-level geometric primitives shared by the mesh, collision and planning code.
//!
//! All routines work in `f64` millimetres. None of them allocate.

use nalgebra::{Isometry3, Point3, Vector3};

pub type Point = Point3<f64>;
pub type Vector = Vector3<f64>;

/// Signed plane distances below this are treated as zero in the
/// triangle-triangle test.
pub const COPLANAR_EPS: f64 = 1e-9;

/// Angle between two vectors in radians, robust near 0 and pi.
pub fn angle_between(a: &Vector, b: &Vector) -> f64 {
    // atan2 of |a x b| and a.b keeps precision at both ends of the range.
    a.cross(b).norm().atan2(a.dot(b))
}

/// Any unit vector perpendicular to `v` (which need not be normalized).
pub fn any_perpendicular(v: &Vector) -> Vector {
    let helper = if v.x.abs() <= v.y.abs() && v.x.abs() <= v.z.abs() {
        Vector::x()
    } else if v.y.abs() <= v.z.abs() {
        Vector::y()
    } else {
        Vector::z()
    };
    v.cross(&helper).normalize()
}

pub fn triangle_centroid(a: &Point, b: &Point, c: &Point) -> Point {
    Point::from((a.coords + b.coords + c.coords) / 3.0)
}

/// Möller–Trumbore ray/triangle intersection.
///
/// Returns `(t, u, v)` with `t` the ray parameter and `(u, v)` the barycentric
/// weights of `b` and `c`. Hits with `t <= t_min` are rejected.
pub fn ray_triangle(
    origin: &Point,
    dir: &Vector,
    a: &Point,
    b: &Point,
    c: &Point,
    t_min: f64,
) -> Option<(f64, f64, f64)> {
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = origin - a;
    let u = s.dot(&p) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv_det;
    if t > t_min {
        Some((t, u, v))
    } else {
        None
    }
}

pub fn closest_point_on_segment(p: &Point, a: &Point, b: &Point) -> Point {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

pub fn point_segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    (p - closest_point_on_segment(p, a, b)).norm()
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> Point {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Squared distance between segments `p1q1` and `p2q2`.
pub fn segment_segment_distance_sq(p1: &Point, q1: &Point, p2: &Point, q2: &Point) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (s, t);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        return r.norm_squared();
    }
    if a <= f64::EPSILON {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= f64::EPSILON {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let c1 = p1 + d1 * s;
    let c2 = p2 + d2 * t;
    (c1 - c2).norm_squared()
}

/// Euclidean distance between segment `pq` and triangle `abc`.
pub fn segment_triangle_distance(p: &Point, q: &Point, a: &Point, b: &Point, c: &Point) -> f64 {
    let mut best = (p - closest_point_on_triangle(p, a, b, c)).norm_squared();
    best = best.min((q - closest_point_on_triangle(q, a, b, c)).norm_squared());
    best = best.min(segment_segment_distance_sq(p, q, a, b));
    best = best.min(segment_segment_distance_sq(p, q, b, c));
    best = best.min(segment_segment_distance_sq(p, q, c, a));
    // Transversal crossing through the interior.
    let n = (b - a).cross(&(c - a));
    let dp = n.dot(&(p - a));
    let dq = n.dot(&(q - a));
    if dp * dq <= 0.0 && dp != dq {
        let x = p + (q - p) * (dp / (dp - dq));
        best = best.min((x - closest_point_on_triangle(&x, a, b, c)).norm_squared());
    }
    best.sqrt()
}

/// Whether segment `pq` touches triangle `abc` (closed sets).
pub fn segment_hits_triangle(p: &Point, q: &Point, a: &Point, b: &Point, c: &Point) -> bool {
    let n = (b - a).cross(&(c - a));
    let dp = n.dot(&(p - a));
    let dq = n.dot(&(q - a));
    if dp * dq > 0.0 {
        return false;
    }
    if dp == 0.0 && dq == 0.0 {
        // Coplanar: touching means crossing an edge or lying inside.
        return segment_segment_distance_sq(p, q, a, b) == 0.0
            || segment_segment_distance_sq(p, q, b, c) == 0.0
            || segment_segment_distance_sq(p, q, c, a) == 0.0
            || inside_triangle(&n, p, a, b, c);
    }
    let x = p + (q - p) * (dp / (dp - dq));
    inside_triangle(&n, &x, a, b, c)
}

fn inside_triangle(n: &Vector, x: &Point, a: &Point, b: &Point, c: &Point) -> bool {
    let e0 = (b - a).cross(&(x - a)).dot(n);
    let e1 = (c - b).cross(&(x - b)).dot(n);
    let e2 = (a - c).cross(&(x - c)).dot(n);
    e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0
}

/// Möller's interval-overlap triangle/triangle intersection test.
///
/// Touching configurations (shared point, edge on face, coplanar overlap)
/// report `true`.
pub fn tri_tri_intersect(v: &[Point; 3], u: &[Point; 3]) -> bool {
    let n1 = match (v[1] - v[0]).cross(&(v[2] - v[0])).try_normalize(0.0) {
        Some(n) => n,
        None => return false,
    };
    let d1 = -n1.dot(&v[0].coords);
    let mut du = [0.0; 3];
    for i in 0..3 {
        du[i] = n1.dot(&u[i].coords) + d1;
        if du[i].abs() < COPLANAR_EPS {
            du[i] = 0.0;
        }
    }
    let du0du1 = du[0] * du[1];
    let du0du2 = du[0] * du[2];
    if du0du1 > 0.0 && du0du2 > 0.0 {
        return false;
    }

    let n2 = match (u[1] - u[0]).cross(&(u[2] - u[0])).try_normalize(0.0) {
        Some(n) => n,
        None => return false,
    };
    let d2 = -n2.dot(&u[0].coords);
    let mut dv = [0.0; 3];
    for i in 0..3 {
        dv[i] = n2.dot(&v[i].coords) + d2;
        if dv[i].abs() < COPLANAR_EPS {
            dv[i] = 0.0;
        }
    }
    let dv0dv1 = dv[0] * dv[1];
    let dv0dv2 = dv[0] * dv[2];
    if dv0dv1 > 0.0 && dv0dv2 > 0.0 {
        return false;
    }

    let dir = n1.cross(&n2);
    let axis = dir.iamax();
    let vp = [v[0][axis], v[1][axis], v[2][axis]];
    let up = [u[0][axis], u[1][axis], u[2][axis]];

    let iv = match compute_interval(vp, dv, dv0dv1, dv0dv2) {
        Some(iv) => iv,
        None => return coplanar_tri_tri(&n1, v, u),
    };
    let iu = match compute_interval(up, du, du0du1, du0du2) {
        Some(iu) => iu,
        None => return coplanar_tri_tri(&n1, v, u),
    };
    let (a0, a1) = if iv.0 <= iv.1 { iv } else { (iv.1, iv.0) };
    let (b0, b1) = if iu.0 <= iu.1 { iu } else { (iu.1, iu.0) };
    !(a1 < b0 || b1 < a0)
}

/// Interval of the triangle's projection onto the intersection line, or
/// `None` when the triangle lies in the other plane.
fn compute_interval(p: [f64; 3], d: [f64; 3], d0d1: f64, d0d2: f64) -> Option<(f64, f64)> {
    let isect = |i: usize, j: usize, k: usize| {
        (
            p[i] + (p[j] - p[i]) * d[i] / (d[i] - d[j]),
            p[i] + (p[k] - p[i]) * d[i] / (d[i] - d[k]),
        )
    };
    if d0d1 > 0.0 {
        Some(isect(2, 0, 1))
    } else if d0d2 > 0.0 {
        Some(isect(1, 0, 2))
    } else if d[1] * d[2] > 0.0 || d[0] != 0.0 {
        Some(isect(0, 1, 2))
    } else if d[1] != 0.0 {
        Some(isect(1, 0, 2))
    } else if d[2] != 0.0 {
        Some(isect(2, 0, 1))
    } else {
        None
    }
}

fn coplanar_tri_tri(n: &Vector, v: &[Point; 3], u: &[Point; 3]) -> bool {
    // Project onto the coordinate plane where the triangles have max area.
    let (i0, i1) = match n.iamax() {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let pv: [[f64; 2]; 3] = [
        [v[0][i0], v[0][i1]],
        [v[1][i0], v[1][i1]],
        [v[2][i0], v[2][i1]],
    ];
    let pu: [[f64; 2]; 3] = [
        [u[0][i0], u[0][i1]],
        [u[1][i0], u[1][i1]],
        [u[2][i0], u[2][i1]],
    ];
    for i in 0..3 {
        for j in 0..3 {
            if segments_intersect_2d(pv[i], pv[(i + 1) % 3], pu[j], pu[(j + 1) % 3]) {
                return true;
            }
        }
    }
    point_in_triangle_2d(pv[0], &pu) || point_in_triangle_2d(pu[0], &pv)
}

fn orient2d(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment_2d(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect_2d(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient2d(q1, q2, p1);
    let d2 = orient2d(q1, q2, p2);
    let d3 = orient2d(p1, p2, q1);
    let d4 = orient2d(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment_2d(q1, q2, p1))
        || (d2 == 0.0 && on_segment_2d(q1, q2, p2))
        || (d3 == 0.0 && on_segment_2d(p1, p2, q1))
        || (d4 == 0.0 && on_segment_2d(p1, p2, q2))
}

fn point_in_triangle_2d(p: [f64; 2], t: &[[f64; 2]; 3]) -> bool {
    let d1 = orient2d(t[0], t[1], p);
    let d2 = orient2d(t[1], t[2], p);
    let d3 = orient2d(t[2], t[0], p);
    let has_neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let has_pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(has_neg && has_pos)
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Point::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Point) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn inflate(&self, r: f64) -> Aabb {
        let d = Vector::repeat(r);
        Aabb {
            min: self.min - d,
            max: self.max + d,
        }
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }

    pub fn center(&self) -> Point {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn extent(&self) -> Vector {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    /// Box enclosing the eight transformed corners.
    pub fn transformed(&self, pose: &Isometry3<f64>) -> Aabb {
        let mut out = Aabb::empty();
        for i in 0..8 {
            let corner = Point::new(
                if i & 1 == 0 { self.min.x } else { self.max.x },
                if i & 2 == 0 { self.min.y } else { self.max.y },
                if i & 4 == 0 { self.min.z } else { self.max.z },
            );
            out.grow(&(pose * corner));
        }
        out
    }

    /// Slab test for the segment `p + s (q - p)`, `s` in `[0, 1]`.
    pub fn intersects_segment(&self, p: &Point, q: &Point) -> bool {
        self.ray_interval(p, &(q - p), 0.0, 1.0).is_some()
    }

    /// Parameter interval where `origin + t dir` lies inside the box, clipped
    /// to `[t0, t1]`.
    pub fn ray_interval(&self, origin: &Point, dir: &Vector, t0: f64, t1: f64) -> Option<(f64, f64)> {
        let mut lo = t0;
        let mut hi = t1;
        for i in 0..3 {
            if dir[i].abs() < 1e-300 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[i];
            let mut a = (self.min[i] - origin[i]) * inv;
            let mut b = (self.max[i] - origin[i]) * inv;
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            lo = lo.max(a);
            hi = hi.min(b);
            if lo > hi {
                return None;
            }
        }
        Some((lo, hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> Point {
        Point::new(x, y, z)
    }

    #[test]
    fn angle_between_handles_extremes() {
        let x = Vector::x();
        assert_eq!(angle_between(&x, &x), 0.0);
        assert!((angle_between(&x, &-x) - std::f64::consts::PI).abs() < 1e-15);
        assert!((angle_between(&x, &Vector::y()) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn ray_hits_triangle_interior() {
        let hit = ray_triangle(
            &p(0.2, 0.2, -1.0),
            &Vector::z(),
            &p(0.0, 0.0, 0.0),
            &p(1.0, 0.0, 0.0),
            &p(0.0, 1.0, 0.0),
            1e-6,
        )
        .unwrap();
        assert!((hit.0 - 1.0).abs() < 1e-12);
        assert!((hit.1 - 0.2).abs() < 1e-12 && (hit.2 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn ray_behind_origin_is_rejected() {
        let hit = ray_triangle(
            &p(0.2, 0.2, 1.0),
            &Vector::z(),
            &p(0.0, 0.0, 0.0),
            &p(1.0, 0.0, 0.0),
            &p(0.0, 1.0, 0.0),
            1e-6,
        );
        assert!(hit.is_none());
    }

    #[test]
    fn closest_point_regions() {
        let (a, b, c) = (p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0));
        assert_eq!(closest_point_on_triangle(&p(-1.0, -1.0, 0.0), &a, &b, &c), a);
        assert_eq!(closest_point_on_triangle(&p(0.25, 0.25, 3.0), &a, &b, &c), p(0.25, 0.25, 0.0));
        let e = closest_point_on_triangle(&p(1.0, 1.0, 0.0), &a, &b, &c);
        assert!((e - p(0.5, 0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn segment_distances() {
        let d = segment_segment_distance_sq(&p(0.0, 0.0, 0.0), &p(1.0, 0.0, 0.0), &p(0.5, 1.0, 2.0), &p(0.5, -1.0, 2.0));
        assert!((d - 4.0).abs() < 1e-12);
        let (a, b, c) = (p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0));
        let through = segment_triangle_distance(&p(0.2, 0.2, -1.0), &p(0.2, 0.2, 1.0), &a, &b, &c);
        assert!(through < 1e-12);
        assert!(segment_hits_triangle(&p(0.2, 0.2, -1.0), &p(0.2, 0.2, 1.0), &a, &b, &c));
        assert!(segment_hits_triangle(&p(0.0, 0.0, 0.0), &p(0.0, 0.0, 1.0), &a, &b, &c));
        assert!(!segment_hits_triangle(&p(0.2, 0.2, 0.5), &p(0.2, 0.2, 1.0), &a, &b, &c));
        assert!(!segment_hits_triangle(&p(0.8, 0.8, -1.0), &p(0.8, 0.8, 1.0), &a, &b, &c));
        let above = segment_triangle_distance(&p(0.2, 0.2, 1.0), &p(0.3, 0.2, 1.0), &a, &b, &c);
        assert!((above - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tri_tri_cases() {
        let t = [p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0)];
        let crossing = [p(0.2, 0.2, -1.0), p(0.2, 0.2, 1.0), p(0.3, -0.5, 0.0)];
        assert!(tri_tri_intersect(&t, &crossing));
        let above = [p(0.0, 0.0, 1.0), p(1.0, 0.0, 1.0), p(0.0, 1.0, 1.0)];
        assert!(!tri_tri_intersect(&t, &above));
        let coplanar = [p(0.5, 0.5, 0.0), p(1.5, 0.5, 0.0), p(0.5, 1.5, 0.0)];
        assert!(tri_tri_intersect(&t, &coplanar));
        let coplanar_far = [p(5.0, 5.0, 0.0), p(6.0, 5.0, 0.0), p(5.0, 6.0, 0.0)];
        assert!(!tri_tri_intersect(&t, &coplanar_far));
        let vertex_touch = [p(1.0, 0.0, 0.0), p(2.0, 0.0, 1.0), p(2.0, 1.0, -1.0)];
        assert!(tri_tri_intersect(&t, &vertex_touch));
        // Pierces the plane outside the triangle.
        let miss = [p(2.0, 2.0, -1.0), p(2.0, 2.0, 1.0), p(3.0, 2.0, 0.0)];
        assert!(!tri_tri_intersect(&t, &miss));
    }

    #[test]
    fn aabb_segment_and_transform() {
        let b = Aabb::from_points(&[p(0.0, 0.0, 0.0), p(1.0, 1.0, 1.0)]);
        assert!(b.intersects_segment(&p(-1.0, 0.5, 0.5), &p(2.0, 0.5, 0.5)));
        assert!(!b.intersects_segment(&p(-1.0, 2.5, 0.5), &p(2.0, 2.5, 0.5)));
        let rot = Isometry3::rotation(Vector::z() * std::f64::consts::FRAC_PI_4);
        let t = b.transformed(&rot);
        assert!((t.extent().x - 2f64.sqrt()).abs() < 1e-12);
    }
}
