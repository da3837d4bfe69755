//! Triangular meshes, their piecewise-linear finite-element matrices, and projector
//! matrices that interpolate vertex values to arbitrary locations.

mod build;
mod fem;
pub mod geometry;
mod locate;
mod projector;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use thiserror::Error;

pub use build::{build_mesh, dedup_points, MeshConfig};
pub use fem::{fem_matrices, FemMatrices};
pub use geometry::Point2;
pub use projector::{make_projector, Projector};

use geometry::{barycentric, orient};
use locate::TriangleLocator;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("no points")]
    NoPoints,
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("invalid mesh parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("non-finite coordinate at point {0}")]
    NonFinitePoint(usize),
    #[error("triangle {triangle} references vertex {vertex}, but the mesh has {n_vertices} vertices")]
    BadIndex { triangle: usize, vertex: usize, n_vertices: usize },
    #[error("triangle {0} is degenerate or clockwise")]
    BadTriangle(usize),
    #[error("edge ({0}, {1}) is shared inconsistently")]
    NonConforming(usize, usize),
    #[error("vertex {0} lies in the interior of an edge (hanging node)")]
    HangingNode(usize),
    #[error("vertex {0} belongs to no triangle")]
    UnusedVertex(usize),
    #[error("mesh refinement did not terminate within {0} insertions")]
    RefinementLimit(usize),
}

/// Conforming counter-clockwise triangulation.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    locator: TriangleLocator,
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
            && self.triangles == other.triangles
            && self.boundary == other.boundary
    }
}

impl Mesh {
    /// Validates and indexes a triangulation.
    ///
    /// Checks index bounds, strictly positive (counter-clockwise) orientation,
    /// that each edge is shared by at most two triangles with opposite directions,
    /// that no vertex sits inside another triangle's edge, and that every vertex is used.
    pub fn new(
        vertices: Vec<Point2>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<bool>,
    ) -> Result<Self, MeshError> {
        let nv = vertices.len();
        if nv < 3 || triangles.is_empty() {
            return Err(MeshError::DegenerateGeometry("a mesh needs at least one triangle"));
        }
        if boundary.len() != nv {
            return Err(MeshError::DegenerateGeometry("boundary flags do not match vertices"));
        }
        if let Some(i) = vertices.iter().position(|p| !p.is_finite()) {
            return Err(MeshError::NonFinitePoint(i));
        }
        let mut used = alloc::vec![false; nv];
        let mut edges: BTreeMap<(usize, usize), (usize, bool)> = BTreeMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(MeshError::BadIndex { triangle: t, vertex: v, n_vertices: nv });
                }
                used[v] = true;
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            let scale = a.distance_squared(&b).max(b.distance_squared(&c)).max(c.distance_squared(&a));
            let twice_area = orient(&a, &b, &c);
            if !(twice_area > 1e-12 * scale) {
                return Err(MeshError::BadTriangle(t));
            }
            for k in 0..3 {
                let (u, w) = (tri[k], tri[(k + 1) % 3]);
                let key = (u.min(w), u.max(w));
                let forward = u < w;
                match edges.get_mut(&key) {
                    None => {
                        edges.insert(key, (1, forward));
                    }
                    Some((count, dir)) => {
                        if *count >= 2 || *dir == forward {
                            return Err(MeshError::NonConforming(key.0, key.1));
                        }
                        *count += 1;
                    }
                }
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(MeshError::UnusedVertex(v));
        }
        let locator = TriangleLocator::new(&vertices, &triangles);
        // A hanging node shows up as a vertex strictly inside an edge that only one
        // triangle uses.
        for (&(u, w), &(count, _)) in &edges {
            if count != 1 {
                continue;
            }
            let (a, b) = (vertices[u], vertices[w]);
            for v in locator.vertices_near_segment(&triangles, &a, &b) {
                if v == u || v == w {
                    continue;
                }
                let p = vertices[v];
                let len2 = a.distance_squared(&b);
                let t = (p - a).dot(&(b - a)) / len2;
                if t > 1e-12 && t < 1.0 - 1e-12 && orient(&a, &b, &p).abs() <= 1e-12 * len2 {
                    return Err(MeshError::HangingNode(v));
                }
            }
        }
        Ok(Mesh { vertices, triangles, boundary, locator })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Per-vertex flag marking the outer boundary.
    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point2; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        0.5 * orient(&a, &b, &c)
    }

    pub fn area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Unique undirected edges as `(low, high)` vertex pairs, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]))))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// `(min_x, min_y, max_x, max_y)` over the vertices.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        self.vertices.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), p| (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y)),
        )
    }

    /// Lowest-index triangle containing `p` and the barycentric weights of `p` in it.
    ///
    /// Weights are clamped to `[0, 1]` and renormalized, so points on shared edges
    /// resolve to a single triangle deterministically.
    pub fn locate(&self, p: &Point2) -> Option<(usize, [f64; 3])> {
        if !p.is_finite() {
            return None;
        }
        for t in self.locator.candidates(p) {
            let [a, b, c] = self.triangle_points(t);
            let w = barycentric(p, &a, &b, &c);
            if w.iter().all(|&l| l >= -1e-12) {
                let clamped = w.map(|l| l.clamp(0.0, 1.0));
                let s: f64 = clamped.iter().sum();
                return Some((t, clamped.map(|l| l / s)));
            }
        }
        None
    }

    /// Smallest distance between any two vertices (quadratic scan).
    pub fn min_vertex_spacing(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                best = best.min(a.distance(b));
            }
        }
        best
    }
}
