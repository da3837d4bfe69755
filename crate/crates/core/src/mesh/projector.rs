use super::{Mesh, Point2};
use crate::linalg::CsrMatrix;
use alloc::vec::Vec;

/// Barycentric interpolation matrix from mesh vertices to query locations.
///
/// Rows of locations outside the mesh are empty and flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: CsrMatrix,
    inside: Vec<bool>,
}

impl Projector {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn n_locations(&self) -> usize {
        self.inside.len()
    }

    pub fn is_inside(&self, row: usize) -> bool {
        self.inside[row]
    }

    pub fn inside_flags(&self) -> &[bool] {
        &self.inside
    }

    /// First row whose location fell outside the mesh.
    pub fn first_outside(&self) -> Option<usize> {
        self.inside.iter().position(|&i| !i)
    }

    /// Vertex indices and weights of one row.
    pub fn row(&self, row: usize) -> (&[usize], &[f64]) {
        self.matrix.row(row)
    }

    /// Interpolates vertex values to every location (zero for outside rows).
    pub fn apply(&self, vertex_values: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(vertex_values)
    }
}

/// Builds the projector for `locs`; exact-zero weights are not stored.
pub fn make_projector(mesh: &Mesh, locs: &[Point2]) -> Projector {
    let mut triplets = Vec::with_capacity(3 * locs.len());
    let mut inside = Vec::with_capacity(locs.len());
    for (row, p) in locs.iter().enumerate() {
        match mesh.locate(p) {
            Some((t, weights)) => {
                inside.push(true);
                for (&v, w) in mesh.triangles()[t].iter().zip(weights) {
                    if w != 0.0 {
                        triplets.push((row, v, w));
                    }
                }
            }
            None => inside.push(false),
        }
    }
    Projector {
        matrix: CsrMatrix::from_triplets(locs.len(), mesh.n_vertices(), &triplets),
        inside,
    }
}
