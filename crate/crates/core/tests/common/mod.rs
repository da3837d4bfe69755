#![allow(dead_code)]

use geocv_core::linalg::CsrMatrix;
use geocv_core::mesh::{build_mesh, fem_matrices, make_projector, FemMatrices, Mesh, MeshConfig, Point2};
use geocv_core::model::{assemble, Assembly, Dataset, Priors};
use geocv_core::formula::ModelSpec;
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn uniform_points(rng: &mut StdRng, n: usize) -> Vec<Point2> {
    (0..n).map(|_| Point2::new(rng.random::<f64>(), rng.random::<f64>())).collect()
}

pub fn normals(rng: &mut StdRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Mesh with no refinement: data points plus the extension ring.
pub fn coarse_mesh(points: &[Point2]) -> Mesh {
    build_mesh(points, &MeshConfig::new(100.0, 100.0, 0.0).with_extension(0.3)).unwrap()
}

pub fn dense(m: &CsrMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.nrows(), m.ncols(), &m.to_dense())
}

/// τ²(κ⁴C + 2κ²G + GC⁻¹G) evaluated densely.
pub fn dense_spde_precision(fem: &FemMatrices, tau: f64, kappa: f64) -> DMatrix<f64> {
    let c = DMatrix::from_diagonal(&DVector::from_vec(fem.c.clone()));
    let c_inv = DMatrix::from_diagonal(&DVector::from_vec(fem.c.iter().map(|c| 1.0 / c).collect()));
    let g = dense(&fem.g);
    (c * kappa.powi(4) + &g * (2.0 * kappa * kappa) + &g * c_inv * &g) * (tau * tau)
}

/// Toy spatial problem: data, mesh, fem, assembly.
pub struct Toy {
    pub data: Dataset,
    pub mesh: Mesh,
    pub fem: FemMatrices,
    pub assembly: Assembly,
    pub spec: ModelSpec,
    pub priors: Priors,
}

pub fn toy(seed: u64, n: usize, spec: &str) -> Toy {
    let mut r = rng(seed);
    let pts = uniform_points(&mut r, n);
    let mesh = coarse_mesh(&pts);
    let fem = fem_matrices(&mesh);
    let x = normals(&mut r, n);
    let noise = normals(&mut r, n);
    let y: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * x[i] + (3.0 * pts[i].x).sin() + 0.3 * noise[i]).collect();
    let data = Dataset::new(pts.clone(), y, vec![("x".into(), x)]).unwrap();
    let spec: ModelSpec = spec.parse().unwrap();
    let proj = make_projector(&mesh, &pts);
    let assembly = assemble(&data, &spec, Some(&proj)).unwrap();
    let priors = Priors::default_for(&pts, data.response(), spec.family);
    Toy { data, mesh, fem, assembly, spec, priors }
}

/// Dense prior precision of the latent vector `[u; β]`.
pub fn dense_prior_precision(t: &Toy, theta: &[f64]) -> DMatrix<f64> {
    let nu = t.assembly.layout().spatial.len();
    let np = t.assembly.layout().fixed.len();
    let mut q = DMatrix::zeros(nu + np, nu + np);
    if nu > 0 {
        let qs = dense_spde_precision(&t.fem, theta[1].exp(), theta[0].exp());
        q.view_mut((0, 0), (nu, nu)).copy_from(&qs);
    }
    for k in nu..nu + np {
        q[(k, k)] = t.priors.fixed_precision;
    }
    q
}

pub fn gaussian_log_prior(theta: &[f64], priors: &[(f64, f64)]) -> f64 {
    theta
        .iter()
        .zip(priors)
        .map(|(t, (m, s))| -0.5 * (2.0 * std::f64::consts::PI).ln() - s.ln() - 0.5 * ((t - m) / s).powi(2))
        .sum()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
