//! Planar polygon helpers shared by the planners and the trajectory optimizer.

use nalgebra::{Matrix3, Vector2, Vector3};

pub type Point2 = Vector2<f64>;

/// Line `p x + q y + r = 0` with unit normal `(p, q)`; the interior is the
/// side where `p x + q y + r > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl HalfPlane {
    /// Half-plane to the left of the directed edge `a -> b`.
    pub fn left_of(a: Point2, b: Point2) -> Self {
        let e = b - a;
        let len = e.norm();
        let (p, q) = (-e.y / len, e.x / len);
        Self {
            p,
            q,
            r: -(p * a.x + q * a.y),
        }
    }

    pub fn eval(&self, pt: Point2) -> f64 {
        self.p * pt.x + self.q * pt.y + self.r
    }

    /// Move the boundary `d` towards the interior.
    pub fn shifted_inward(&self, d: f64) -> Self {
        Self { r: self.r - d, ..*self }
    }
}

/// Twice the signed area; positive for counter-clockwise vertex order.
pub fn signed_area2(poly: &[Point2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum()
}

pub fn area(poly: &[Point2]) -> f64 {
    0.5 * signed_area2(poly).abs()
}

pub fn centroid(points: &[Point2]) -> Point2 {
    points.iter().sum::<Point2>() / points.len() as f64
}

/// Convex hull in counter-clockwise order (Andrew's monotone chain);
/// collinear points are dropped.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Point2, a: Point2, b: Point2| (a - o).perp(&(b - o));
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Edge half-planes of a convex counter-clockwise polygon.
pub fn edge_half_planes(poly: &[Point2]) -> Vec<HalfPlane> {
    let n = poly.len();
    (0..n)
        .map(|i| HalfPlane::left_of(poly[i], poly[(i + 1) % n]))
        .collect()
}

/// Keep the part of a convex polygon where `hp.eval >= 0` (Sutherland-Hodgman).
pub fn clip(poly: &[Point2], hp: &HalfPlane) -> Vec<Point2> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let (fa, fb) = (hp.eval(a), hp.eval(b));
        if fa >= 0.0 {
            out.push(a);
        }
        if (fa >= 0.0) != (fb >= 0.0) {
            let t = fa / (fa - fb);
            out.push(a + (b - a) * t);
        }
    }
    out
}

/// Inscribed-circle radius of a triangle; zero when degenerate.
pub fn inradius(a: Point2, b: Point2, c: Point2) -> f64 {
    let perimeter = (b - a).norm() + (c - b).norm() + (a - c).norm();
    if perimeter <= 0.0 {
        return 0.0;
    }
    area(&[a, b, c]) * 2.0 / perimeter
}

/// True when the two convex polygons can be strictly separated by a line.
/// Polygons that merely touch are not disjoint.
pub fn convex_disjoint(a: &[Point2], b: &[Point2]) -> bool {
    const EPS: f64 = 1e-12;
    for poly in [a, b] {
        let n = poly.len();
        for i in 0..n {
            let e = poly[(i + 1) % n] - poly[i];
            let axis = Point2::new(-e.y, e.x);
            let norm = axis.norm();
            if norm == 0.0 {
                continue;
            }
            let axis = axis / norm;
            let (amin, amax) = project(a, axis);
            let (bmin, bmax) = project(b, axis);
            if amax < bmin - EPS || bmax < amin - EPS {
                return true;
            }
        }
    }
    false
}

fn project(poly: &[Point2], axis: Point2) -> (f64, f64) {
    poly.iter()
        .map(|p| p.dot(&axis))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
}

/// Least-squares plane `z = a x + b y + c` through the points.
/// Returns `None` when the points are collinear in the xy-plane.
pub fn fit_plane(points: &[Vector3<f64>]) -> Option<(f64, f64, f64)> {
    let n = points.len() as f64;
    let mean = points.iter().sum::<Vector3<f64>>() / n;
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for p in points {
        let d = p - mean;
        let row = Vector3::new(d.x, d.y, 1.0);
        ata += row * row.transpose();
        atb += row * d.z;
    }
    let sol = ata.lu().solve(&atb)?;
    if !sol.iter().all(|v| v.is_finite()) {
        return None;
    }
    let (a, b) = (sol.x, sol.y);
    Some((a, b, mean.z - a * mean.x - b * mean.y + sol.z))
}

/// `|roll| + |pitch|` of the plane fitted through `points`, measured in a frame
/// rotated by `yaw`.
pub fn plane_tilt(points: &[Vector3<f64>], yaw: f64) -> f64 {
    let Some((a, b, _)) = fit_plane(points) else {
        return 0.0;
    };
    // Gradient in the body frame: rotate (a, b) by -yaw.
    let (s, c) = yaw.sin_cos();
    let gx = c * a + s * b;
    let gy = -s * a + c * b;
    gx.atan().abs() + gy.atan().abs()
}
