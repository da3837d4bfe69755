use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

/// A location in the (usually standardized) coordinate plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        self.distance_squared(other).sqrt()
    }

    pub fn distance_squared(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn dot(&self, other: &Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2-D cross product.
    pub fn cross(&self, other: &Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn midpoint(&self, other: &Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// Twice the signed area of `(a, b, c)`; positive when counter-clockwise.
pub fn orient(a: &Point2, b: &Point2, c: &Point2) -> f64 {
    (*b - *a).cross(&(*c - *a))
}

/// Barycentric coordinates of `p` with respect to triangle `(a, b, c)`.
pub fn barycentric(p: &Point2, a: &Point2, b: &Point2, c: &Point2) -> [f64; 3] {
    let det = orient(a, b, c);
    let la = (*b - *p).cross(&(*c - *p)) / det;
    let lb = (*c - *p).cross(&(*a - *p)) / det;
    let lc = (*a - *p).cross(&(*b - *p)) / det;
    [la, lb, lc]
}

/// Circumcenter of a non-degenerate triangle.
pub fn circumcenter(a: &Point2, b: &Point2, c: &Point2) -> Point2 {
    let ab = *b - *a;
    let ac = *c - *a;
    let d = 2.0 * ab.cross(&ac);
    let ab2 = ab.dot(&ab);
    let ac2 = ac.dot(&ac);
    let ux = (ac.y * ab2 - ab.y * ac2) / d;
    let uy = (ab.x * ac2 - ac.x * ab2) / d;
    *a + Point2::new(ux, uy)
}

/// Strictly convex hull in counter-clockwise order (Andrew's monotone chain);
/// collinear boundary points are dropped.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for p in &pts {
        while hull.len() >= 2 && orient(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && orient(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    hull
}

/// Whether `p` lies inside or on a counter-clockwise convex polygon, with absolute
/// slack `tol` on the edge half-planes.
pub fn in_convex_polygon(polygon: &[Point2], p: &Point2, tol: f64) -> bool {
    let m = polygon.len();
    (0..m).all(|k| {
        let a = polygon[k];
        let b = polygon[(k + 1) % m];
        let edge = b - a;
        let len = edge.norm();
        edge.cross(&(*p - a)) >= -tol * len
    })
}

/// Signed distance from `p` to the boundary of a counter-clockwise convex polygon,
/// positive inside.
pub fn convex_polygon_depth(polygon: &[Point2], p: &Point2) -> f64 {
    let m = polygon.len();
    (0..m)
        .map(|k| {
            let a = polygon[k];
            let b = polygon[(k + 1) % m];
            let edge = b - a;
            edge.cross(&(*p - a)) / edge.norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Largest pairwise distance (brute force over the hull when there are many points).
pub fn max_pairwise_distance(points: &[Point2]) -> f64 {
    let candidates = if points.len() > 64 { convex_hull(points) } else { points.to_vec() };
    let mut best = 0.0f64;
    for (i, a) in candidates.iter().enumerate() {
        for b in &candidates[i + 1..] {
            best = best.max(a.distance(b));
        }
    }
    best
}

/// Shoelace area of a simple polygon (positive when counter-clockwise).
pub fn polygon_area(polygon: &[Point2]) -> f64 {
    let m = polygon.len();
    0.5 * (0..m).map(|k| polygon[k].cross(&polygon[(k + 1) % m])).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_square_with_interior_and_edge_points() {
        let pts = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.5, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.4, 0.6),
        ];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert!((polygon_area(&hull) - 1.0).abs() < 1e-15);
        assert!(in_convex_polygon(&hull, &Point2::new(0.5, 0.0), 0.0));
        assert!(!in_convex_polygon(&hull, &Point2::new(0.5, -1e-9), 0.0));
        assert!((convex_polygon_depth(&hull, &Point2::new(0.5, 0.25)) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn barycentric_and_circumcenter() {
        let (a, b, c) = (Point2::new(0.0, 0.0), Point2::new(2.0, 0.0), Point2::new(0.0, 2.0));
        let w = barycentric(&Point2::new(0.5, 0.5), &a, &b, &c);
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.25).abs() < 1e-15);
        assert_eq!(barycentric(&b, &a, &b, &c), [0.0, 1.0, 0.0]);
        let cc = circumcenter(&a, &b, &c);
        assert!((cc.x - 1.0).abs() < 1e-15 && (cc.y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn max_distance_uses_hull_consistently() {
        let pts: Vec<Point2> =
            (0..100).map(|i| Point2::new((i as f64 * 0.7).cos() * i as f64, (i as f64).sin())).collect();
        let mut brute = 0.0f64;
        for a in &pts {
            for b in &pts {
                brute = brute.max(a.distance(b));
            }
        }
        assert_eq!(max_pairwise_distance(&pts), brute);
    }
}
