//! Mesh construction: cutoff deduplication, a smooth convex extension ring around
//! the data hull, Delaunay triangulation, and refinement until every edge meets its
//! length bound.

use super::geometry::{
    circumcenter, convex_hull, convex_polygon_depth, in_convex_polygon, max_pairwise_distance,
    Point2,
};
use super::{Mesh, MeshError};
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::f64::consts::PI;
use spade::{DelaunayTriangulation, Triangulation};

/// Edges may exceed their nominal maximum by this factor before being refined.
pub const EDGE_SLACK: f64 = 1.5;

/// Extension width as a fraction of the data hull diameter when none is given.
pub const DEFAULT_EXTENSION_FRACTION: f64 = 0.3;

const MAX_INSERTIONS: usize = 500_000;

/// Hull corners flatter than this are merged before building the ring.
const MIN_TURN: f64 = 0.1;

/// Parameters for [`build_mesh`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshConfig {
    /// Nominal maximum edge length inside the convex hull of the data.
    pub max_edge_inner: f64,
    /// Nominal maximum edge length in the extension ring.
    pub max_edge_outer: f64,
    /// Minimum distance between vertices.
    pub cutoff: f64,
    /// Width of the ring around the data hull; `None` uses
    /// [`DEFAULT_EXTENSION_FRACTION`] of the hull diameter.
    pub extension: Option<f64>,
}

impl MeshConfig {
    pub fn new(max_edge_inner: f64, max_edge_outer: f64, cutoff: f64) -> Self {
        MeshConfig { max_edge_inner, max_edge_outer, cutoff, extension: None }
    }

    pub fn with_extension(mut self, extension: f64) -> Self {
        self.extension = Some(extension);
        self
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let check = |name, value: f64, ok: bool| {
            if value.is_finite() && ok {
                Ok(())
            } else {
                Err(MeshError::InvalidParameter { name, value })
            }
        };
        check("max_edge_inner", self.max_edge_inner, self.max_edge_inner > 0.0)?;
        check(
            "max_edge_outer",
            self.max_edge_outer,
            self.max_edge_outer >= self.max_edge_inner,
        )?;
        check("cutoff", self.cutoff, self.cutoff >= 0.0)?;
        if let Some(e) = self.extension {
            check("extension", e, e > 0.0)?;
        }
        Ok(())
    }
}

/// Greedy cutoff thinning: a point is kept unless it lies closer than `cutoff` to a
/// point kept before it.
pub fn dedup_points(points: &[Point2], cutoff: f64) -> Result<Vec<Point2>, MeshError> {
    if points.is_empty() {
        return Err(MeshError::NoPoints);
    }
    if !(cutoff >= 0.0) || !cutoff.is_finite() {
        return Err(MeshError::InvalidParameter { name: "cutoff", value: cutoff });
    }
    if let Some(i) = points.iter().position(|p| !p.is_finite()) {
        return Err(MeshError::NonFinitePoint(i));
    }
    if cutoff == 0.0 {
        return Ok(points.to_vec());
    }
    let key = |p: &Point2| ((p.x / cutoff).floor() as i64, (p.y / cutoff).floor() as i64);
    let mut buckets: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    let mut kept: Vec<Point2> = Vec::new();
    let cutoff2 = cutoff * cutoff;
    for p in points {
        let (kx, ky) = key(p);
        let mut clash = false;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = buckets.get(&(kx + dx, ky + dy)) {
                    if list.iter().any(|&k| kept[k].distance_squared(p) < cutoff2) {
                        clash = true;
                        break 'search;
                    }
                }
            }
        }
        if !clash {
            buckets.entry((kx, ky)).or_default().push(kept.len());
            kept.push(*p);
        }
    }
    Ok(kept)
}

/// Builds a conforming triangulation containing every (deduplicated) input point.
///
/// The domain is the data's convex hull plus a smooth convex ring of width
/// `extension`. Edges with both endpoints in the hull are refined until they are at
/// most `1.5 × max_edge_inner` long, all others until `1.5 × max_edge_outer`. Steiner
/// points closer than `cutoff` to an existing vertex are never inserted, so an
/// aggressive cutoff can leave a few edges above their bound. Coincident input points
/// are collapsed even when `cutoff` is zero.
pub fn build_mesh(points: &[Point2], config: &MeshConfig) -> Result<Mesh, MeshError> {
    config.validate()?;
    let mut data = dedup_points(points, config.cutoff)?;
    let mut seen = BTreeSet::new();
    data.retain(|p| seen.insert((p.x.to_bits(), p.y.to_bits())));

    let hull = convex_hull(&data);
    if hull.len() < 3 {
        return Err(MeshError::DegenerateGeometry("all points are collinear"));
    }
    let diameter = max_pairwise_distance(&hull);
    let extension = config.extension.unwrap_or(DEFAULT_EXTENSION_FRACTION * diameter);
    let ring = extension_ring(&hull, extension, config.max_edge_outer)?;

    let mut refiner = Refiner {
        tri: DelaunayTriangulation::new(),
        points: Vec::new(),
        boundary: Vec::new(),
        inner: Vec::new(),
        hull_tol: 1e-9 * diameter,
        hull,
        ring,
        cutoff: config.cutoff,
        inner_bound: EDGE_SLACK * config.max_edge_inner,
        outer_bound: EDGE_SLACK * config.max_edge_outer,
    };
    for p in &data {
        refiner.insert(*p, false, true)?;
    }
    for p in refiner.ring.clone() {
        refiner.insert(p, true, false)?;
    }
    refiner.refine()?;
    refiner.into_mesh()
}

/// Smooth, strictly convex closed curve at distance ≥ `extension` outside `hull`,
/// sampled with spacing at most `spacing`.
///
/// Hull edges become large-radius circular arcs joined tangentially by corner arcs of
/// radius `extension`, so consecutive samples are never collinear.
fn extension_ring(hull: &[Point2], extension: f64, spacing: f64) -> Result<Vec<Point2>, MeshError> {
    let simple = simplify_hull(hull);
    // Dropping flat corners can cut slightly into the data; widen to compensate.
    let cut = hull
        .iter()
        .map(|p| -convex_polygon_depth(&simple, p))
        .fold(0.0f64, f64::max);
    let width = extension + cut;

    let m = simple.len();
    let dir: Vec<Point2> = (0..m)
        .map(|k| {
            let d = simple[(k + 1) % m] - simple[k];
            d * (1.0 / d.norm())
        })
        .collect();
    let turn: Vec<f64> = (0..m)
        .map(|k| {
            let (a, b) = (dir[(k + m - 1) % m], dir[k]);
            a.cross(&b).atan2(a.dot(&b))
        })
        .collect();
    // Half-angle subtended by each bulged edge arc.
    let half: Vec<f64> = (0..m).map(|k| (turn[k] / 3.0).min(turn[(k + 1) % m] / 3.0).min(0.03)).collect();
    let centers: Vec<Point2> = (0..m)
        .map(|k| {
            let a = simple[k];
            let b = simple[(k + 1) % m];
            let len = a.distance(&b);
            let normal = Point2::new(dir[k].y, -dir[k].x);
            a.midpoint(&b) - normal * (len / (2.0 * half[k].tan()))
        })
        .collect();

    let mut samples = Vec::new();
    let mut push_arc = |center: Point2, radius: f64, from: f64, span: f64| {
        let by_length = (radius * span / spacing).ceil();
        let by_angle = (span / (PI / 3.0)).ceil();
        let segments = by_length.max(by_angle).max(1.0) as usize;
        for i in 0..segments {
            let angle = from + span * i as f64 / segments as f64;
            samples.push(center + Point2::new(angle.cos(), angle.sin()) * radius);
        }
    };
    let angle_of = |v: Point2| v.y.atan2(v.x);
    for k in 0..m {
        let corner = simple[k];
        let prev_center = centers[(k + m - 1) % m];
        let from = angle_of(corner - prev_center);
        let span = turn[k] - half[(k + m - 1) % m] - half[k];
        push_arc(corner, width, from, span);
        let big = centers[k];
        let radius = corner.distance(&big) + width;
        push_arc(big, radius, angle_of(corner - big), 2.0 * half[k]);
    }

    // Thin out samples from very short corner arcs.
    let min_sep = 0.5 * spacing.min(0.5 * width);
    let mut ring: Vec<Point2> = Vec::with_capacity(samples.len());
    for p in samples {
        if ring.last().map_or(true, |q: &Point2| q.distance(&p) >= min_sep) {
            ring.push(p);
        }
    }
    while ring.len() > 3 && ring[0].distance(ring.last().unwrap()) < min_sep {
        ring.pop();
    }
    if ring.len() < 3 || hull.iter().any(|p| convex_polygon_depth(&ring, p) < 0.5 * extension) {
        return Err(MeshError::DegenerateGeometry("extension ring does not enclose the data"));
    }
    Ok(ring)
}

/// Removes hull vertices whose exterior angle is below [`MIN_TURN`].
fn simplify_hull(hull: &[Point2]) -> Vec<Point2> {
    let mut poly = hull.to_vec();
    while poly.len() > 3 {
        let m = poly.len();
        let (k, angle) = (0..m)
            .map(|k| {
                let a = poly[k] - poly[(k + m - 1) % m];
                let b = poly[(k + 1) % m] - poly[k];
                (k, a.cross(&b).atan2(a.dot(&b)))
            })
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if angle >= MIN_TURN {
            break;
        }
        poly.remove(k);
    }
    poly
}

struct Refiner {
    tri: DelaunayTriangulation<spade::Point2<f64>>,
    points: Vec<Point2>,
    boundary: Vec<bool>,
    inner: Vec<bool>,
    hull: Vec<Point2>,
    hull_tol: f64,
    ring: Vec<Point2>,
    cutoff: f64,
    inner_bound: f64,
    outer_bound: f64,
}

impl Refiner {
    /// Inserts `p` unless it is within the cutoff of an existing vertex. Data points
    /// (`force`) skip the check since they were deduplicated already.
    fn insert(&mut self, p: Point2, on_boundary: bool, force: bool) -> Result<bool, MeshError> {
        if !force {
            if let Some(nearest) = self.tri.nearest_neighbor(spade::Point2::new(p.x, p.y)) {
                let q = nearest.position();
                let d = Point2::new(q.x, q.y).distance(&p);
                if d < self.cutoff || d <= 1e-3 * self.hull_tol {
                    return Ok(false);
                }
            }
        }
        let handle = self
            .tri
            .insert(spade::Point2::new(p.x, p.y))
            .map_err(|_| MeshError::DegenerateGeometry("point rejected by the triangulation"))?;
        if handle.index() != self.points.len() {
            return Ok(false);
        }
        self.points.push(p);
        self.boundary.push(on_boundary);
        self.inner.push(in_convex_polygon(&self.hull, &p, self.hull_tol));
        Ok(true)
    }

    fn bound(&self, a: usize, b: usize) -> f64 {
        if self.inner[a] && self.inner[b] {
            self.inner_bound
        } else {
            self.outer_bound
        }
    }

    fn refine(&mut self) -> Result<(), MeshError> {
        let mut frozen: BTreeSet<(usize, usize)> = BTreeSet::new();
        let margin = 1e3 * self.hull_tol;
        for _ in 0..MAX_INSERTIONS {
            // Worst offending edge over all triangles.
            let mut worst: Option<(f64, [usize; 3], (usize, usize))> = None;
            for face in self.tri.inner_faces() {
                let vs = face.vertices().map(|v| v.fix().index());
                for k in 0..3 {
                    let (a, b) = (vs[k], vs[(k + 1) % 3]);
                    let key = (a.min(b), a.max(b));
                    if frozen.contains(&key) {
                        continue;
                    }
                    let ratio = self.points[a].distance(&self.points[b]) / self.bound(a, b);
                    if ratio > 1.0 && worst.map_or(true, |w| ratio > w.0) {
                        worst = Some((ratio, vs, key));
                    }
                }
            }
            let Some((_, vs, edge)) = worst else {
                return Ok(());
            };
            let [a, b, c] = vs.map(|v| self.points[v]);
            let mut candidates = Vec::with_capacity(2);
            let cc = circumcenter(&a, &b, &c);
            if cc.is_finite() && convex_polygon_depth(&self.ring, &cc) > margin {
                candidates.push(cc);
            }
            candidates.push(self.points[edge.0].midpoint(&self.points[edge.1]));
            let mut inserted = false;
            for p in candidates {
                if self.insert(p, false, false)? {
                    inserted = true;
                    break;
                }
            }
            if !inserted {
                frozen.insert(edge);
            }
        }
        Err(MeshError::RefinementLimit(MAX_INSERTIONS))
    }

    fn into_mesh(self) -> Result<Mesh, MeshError> {
        let mut triangles: Vec<[usize; 3]> = self
            .tri
            .inner_faces()
            .map(|face| {
                let mut t = face.vertices().map(|v| v.fix().index());
                let [p, q, r] = t.map(|v| self.points[v]);
                if super::geometry::orient(&p, &q, &r) < 0.0 {
                    t.swap(1, 2);
                }
                let low = (0..3).min_by_key(|&k| t[k]).unwrap();
                t.rotate_left(low);
                t
            })
            .collect();
        triangles.sort_unstable();
        Mesh::new(self.points, triangles, self.boundary)
    }
}
