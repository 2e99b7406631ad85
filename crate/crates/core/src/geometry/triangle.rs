use super::{GeometryError, Ray, Vec3};

/// Minimum accepted ray parameter; keeps rays cast from a surface from
/// re-hitting it.
pub const HIT_EPSILON: f64 = 1e-6;

/// Triangles with a smaller area are rejected as degenerate.
pub const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleHit {
    pub t: f64,
    pub point: Vec3,
    /// Unit normal `(b - a) x (c - a)`.
    pub normal: Vec3,
    /// Weights of `a`, `b`, `c`; they sum to one.
    pub bary: [f64; 3],
}

/// Intersects `ray` with the triangle `abc`, counting edges as inside.
///
/// Returns `Ok(None)` when the ray misses or only meets the triangle at
/// `t < HIT_EPSILON`.
pub fn intersect_ray_triangle(ray: &Ray, [a, b, c]: [Vec3; 3]) -> Result<Option<TriangleHit>, GeometryError> {
    let e1 = b - a;
    let e2 = c - a;
    let n = e1.cross(&e2);
    let area = 0.5 * n.norm();
    if !(area >= DEGENERATE_AREA) {
        return Err(GeometryError::DegenerateTriangle(area));
    }
    Ok(moller_trumbore(ray, a, e1, e2).map(|(t, u, v)| TriangleHit {
        t,
        point: ray.at(t),
        normal: n / (2.0 * area),
        bary: [1.0 - u - v, u, v],
    }))
}

/// Möller–Trumbore on a pre-validated triangle given as `a` and its two edges.
/// Returns `(t, u, v)` where `u`, `v` are the weights of `b` and `c`.
#[inline]
pub(crate) fn moller_trumbore(ray: &Ray, a: Vec3, e1: Vec3, e2: Vec3) -> Option<(f64, f64, f64)> {
    let p = ray.direction.cross(&e2);
    let det = e1.dot(&p);
    // Relative test: det scales with |e1||e2| for a unit direction.
    if det.abs() <= 1e-14 * e1.norm() * e2.norm() {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = ray.direction.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    if t >= HIT_EPSILON {
        Some((t, u, v))
    } else {
        None
    }
}

/// Closest point to `p` on triangle `abc`, with its barycentric weights.
pub fn closest_point_on_triangle(p: Vec3, [a, b, c]: [Vec3; 3]) -> (Vec3, [f64; 3]) {
    // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, [1.0, 0.0, 0.0]);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}
