use super::Mesh;
use crate::linalg::CsrMatrix;
use alloc::vec;
use alloc::vec::Vec;

/// Piecewise-linear finite-element matrices on a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct FemMatrices {
    /// Lumped mass matrix diagonal, `C_ii = Σ area(T) / 3` over triangles touching `i`.
    pub c: Vec<f64>,
    /// Stiffness matrix `G_ij = ∫ ∇φ_i · ∇φ_j`.
    pub g: CsrMatrix,
}

impl FemMatrices {
    pub fn n_vertices(&self) -> usize {
        self.c.len()
    }
}

/// Assembles the lumped mass and stiffness matrices.
pub fn fem_matrices(mesh: &Mesh) -> FemMatrices {
    let nv = mesh.n_vertices();
    let mut c = vec![0.0; nv];
    let mut triplets = Vec::with_capacity(9 * mesh.n_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.triangle_points(t);
        let area = mesh.triangle_area(t);
        // edge opposite vertex k
        let e = [p[2] - p[1], p[0] - p[2], p[1] - p[0]];
        for a in 0..3 {
            c[tri[a]] += area / 3.0;
            for b in 0..3 {
                triplets.push((tri[a], tri[b], e[a].dot(&e[b]) / (4.0 * area)));
            }
        }
    }
    FemMatrices { c, g: CsrMatrix::from_triplets(nv, nv, &triplets) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Point2;

    #[test]
    fn single_right_triangle() {
        let mesh = Mesh::new(
            vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)],
            vec![[0, 1, 2]],
            vec![true; 3],
        )
        .unwrap();
        let fem = fem_matrices(&mesh);
        for &ci in &fem.c {
            assert!((ci - 1.0 / 6.0).abs() < 1e-15);
        }
        let expected = [1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5];
        for (g, e) in fem.g.to_dense().iter().zip(expected) {
            assert!((g - e).abs() < 1e-15);
        }
    }
}
