use super::geometry::Point2;
use alloc::vec;
use alloc::vec::Vec;

/// Uniform bucket grid over triangle bounding boxes. Each bucket lists triangle
/// indices in increasing order, so the first hit is the lowest-index triangle.
#[derive(Debug, Clone)]
pub(crate) struct TriangleLocator {
    origin: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl TriangleLocator {
    pub(crate) fn new(vertices: &[Point2], triangles: &[[usize; 3]]) -> Self {
        let (mut lo, mut hi) = (
            Point2::new(f64::INFINITY, f64::INFINITY),
            Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        );
        for p in vertices {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let w = (hi.x - lo.x).max(f64::MIN_POSITIVE);
        let h = (hi.y - lo.y).max(f64::MIN_POSITIVE);
        let target = (triangles.len() as f64).max(1.0);
        let cell = ((w * h) / target).sqrt().max(w.max(h) / 4096.0);
        let nx = ((w / cell).ceil() as usize).max(1);
        let ny = ((h / cell).ceil() as usize).max(1);
        let mut locator = TriangleLocator { origin: lo, cell, nx, ny, buckets: vec![Vec::new(); nx * ny] };
        for (t, tri) in triangles.iter().enumerate() {
            let pts = tri.map(|v| vertices[v]);
            let (i0, j0) = locator.cell_of(&Point2::new(
                pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min),
                pts.iter().map(|p| p.y).fold(f64::INFINITY, f64::min),
            ));
            let (i1, j1) = locator.cell_of(&Point2::new(
                pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max),
                pts.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max),
            ));
            for i in i0..=i1 {
                for j in j0..=j1 {
                    locator.buckets[j * nx + i].push(t);
                }
            }
        }
        locator
    }

    fn cell_of(&self, p: &Point2) -> (usize, usize) {
        let fx = ((p.x - self.origin.x) / self.cell).floor();
        let fy = ((p.y - self.origin.y) / self.cell).floor();
        let i = (fx.max(0.0) as usize).min(self.nx - 1);
        let j = (fy.max(0.0) as usize).min(self.ny - 1);
        (i, j)
    }

    fn outside_grid(&self, p: &Point2) -> bool {
        let slack = 1e-9 * self.cell;
        p.x < self.origin.x - slack
            || p.y < self.origin.y - slack
            || p.x > self.origin.x + self.nx as f64 * self.cell + slack
            || p.y > self.origin.y + self.ny as f64 * self.cell + slack
    }

    /// Candidate triangles for `p` in increasing index order.
    pub(crate) fn candidates(&self, p: &Point2) -> impl Iterator<Item = usize> + '_ {
        let bucket: &[usize] = if self.outside_grid(p) {
            &[]
        } else {
            let (i, j) = self.cell_of(p);
            &self.buckets[j * self.nx + i]
        };
        bucket.iter().copied()
    }

    /// Vertices of triangles registered in buckets overlapped by the segment's box.
    pub(crate) fn vertices_near_segment(
        &self,
        triangles: &[[usize; 3]],
        a: &Point2,
        b: &Point2,
    ) -> Vec<usize> {
        let (i0, j0) = self.cell_of(&Point2::new(a.x.min(b.x), a.y.min(b.y)));
        let (i1, j1) = self.cell_of(&Point2::new(a.x.max(b.x), a.y.max(b.y)));
        let mut out = Vec::new();
        for i in i0..=i1 {
            for j in j0..=j1 {
                for &t in &self.buckets[j * self.nx + i] {
                    out.extend_from_slice(&triangles[t]);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}
