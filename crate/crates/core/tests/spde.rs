mod common;

use common::*;
use geocv_core::linalg::SparseCholesky;
use geocv_core::mesh::{build_mesh, fem_matrices, Mesh, MeshConfig, Point2};
use geocv_core::spde::{assemble_precision, spde_summaries, theta_log_prior, SpdeParams};
use rand::Rng;

#[test]
fn precision_matches_dense_formula_and_is_spd() {
    let mut r = rng(11);
    let mut checked = 0;
    for _ in 0..40 {
        let n = r.random_range(3..30);
        let mesh = coarse_mesh(&uniform_points(&mut r, n));
        if mesh.n_vertices() > 50 {
            continue;
        }
        let fem = fem_matrices(&mesh);
        let params = SpdeParams::new(r.random_range(-2.0..2.0), r.random_range(-1.5..2.5));
        let q = dense(assemble_precision(&fem, &params).unwrap().matrix());
        let oracle = dense_spde_precision(&fem, params.tau(), params.kappa());
        let scale = oracle.amax();
        assert!((&q - &oracle).amax() <= 1e-10 * scale.max(1.0));
        assert!((&q - q.transpose()).amax() <= 1e-12 * scale.max(1.0));
        let eig = q.symmetric_eigenvalues();
        assert!(eig.iter().all(|&e| e > 0.0), "min eigenvalue {}", eig.min());
        checked += 1;
    }
    assert!(checked >= 25);
}

#[test]
fn single_triangle_dense_oracle() {
    let mesh = Mesh::new(
        vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)],
        vec![[0, 1, 2]],
        vec![true; 3],
    )
    .unwrap();
    let fem = fem_matrices(&mesh);
    let q = dense(assemble_precision(&fem, &SpdeParams::new(0.0, 0.0)).unwrap().matrix());
    let c = 1.0 / 6.0;
    let g = nalgebra::DMatrix::from_row_slice(3, 3, &[1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5]);
    let oracle = nalgebra::DMatrix::identity(3, 3) * c + &g * 2.0 + &g * &g / c;
    assert!((q - oracle).amax() < 1e-12);
}

#[test]
fn tau_scaling_law() {
    let mut r = rng(12);
    let mesh = coarse_mesh(&uniform_points(&mut r, 15));
    let fem = fem_matrices(&mesh);
    let a = assemble_precision(&fem, &SpdeParams::from_tau_kappa(1.3, 2.0)).unwrap();
    let b = assemble_precision(&fem, &SpdeParams::from_tau_kappa(2.6, 2.0)).unwrap();
    for (x, y) in a.matrix().values().iter().zip(b.matrix().values()) {
        assert!((4.0 * x - y).abs() <= 1e-12 * y.abs().max(1.0));
    }
}

#[test]
fn relabeling_vertices_permutes_precision() {
    let mut r = rng(13);
    let pts = uniform_points(&mut r, 5);
    let mesh = coarse_mesh(&pts);
    let n = mesh.n_vertices();
    assert!(n >= 8);
    // Reverse the labels.
    let new_of = |i: usize| n - 1 - i;
    let mut vertices = vec![Point2::default(); n];
    let mut flags = vec![false; n];
    for i in 0..n {
        vertices[new_of(i)] = mesh.vertices()[i];
        flags[new_of(i)] = mesh.boundary_flags()[i];
    }
    let triangles: Vec<[usize; 3]> = mesh.triangles().iter().map(|t| [new_of(t[0]), new_of(t[1]), new_of(t[2])]).collect();
    let relabeled = Mesh::new(vertices, triangles, flags).unwrap();
    let params = SpdeParams::new(0.4, 0.9);
    let q = assemble_precision(&fem_matrices(&mesh), &params).unwrap();
    let qr = assemble_precision(&fem_matrices(&relabeled), &params).unwrap();
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (q.matrix().get(i, j), qr.matrix().get(new_of(i), new_of(j)));
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}

#[test]
fn summaries_decrease_in_kappa_and_tau() {
    let mut prev = spde_summaries(&SpdeParams::from_tau_kappa(1.0, 0.1));
    for k in 1..20 {
        let s = spde_summaries(&SpdeParams::from_tau_kappa(1.0, 0.1 + 0.3 * k as f64));
        assert!(s.range < prev.range && s.marginal_sd < prev.marginal_sd);
        prev = s;
    }
    let a = spde_summaries(&SpdeParams::from_tau_kappa(1.0, 2.0));
    let b = spde_summaries(&SpdeParams::from_tau_kappa(1.5, 2.0));
    assert!(b.marginal_sd < a.marginal_sd);
    let s = spde_summaries(&SpdeParams::from_tau_kappa(1.0, 8f64.sqrt()));
    assert!((s.range - 1.0).abs() < 1e-15);
}

#[test]
fn log_prior_integrates_to_one() {
    let (m, s) = ((0.3, -1.0), (0.7, 1.4));
    let h = 0.02;
    let mut total = 0.0;
    let mut a = m.0 - 8.0 * s.0;
    while a < m.0 + 8.0 * s.0 {
        let mut b = m.1 - 8.0 * s.1;
        while b < m.1 + 8.0 * s.1 {
            total += theta_log_prior(&SpdeParams::new(a, b), m, s).unwrap().exp() * h * h;
            b += h;
        }
        a += h;
    }
    assert!((total - 1.0).abs() < 1e-3, "total {total}");
    let d = 0.37;
    let up = theta_log_prior(&SpdeParams::new(m.0 + d, m.1 + d), m, s).unwrap();
    let down = theta_log_prior(&SpdeParams::new(m.0 - d, m.1 - d), m, s).unwrap();
    assert!((up - down).abs() < 1e-12);
}

/// Matérn ν = 1 correlation `κr K₁(κr)` at the nominal range, `κr = √8`.
fn matern_at_range() -> f64 {
    let x: f64 = 8f64.sqrt();
    // K₁ via its integral representation ∫₀^∞ exp(−x cosh t) cosh t dt.
    let h = 1e-4;
    let k1: f64 = (0..200_000).map(|i| {
        let t = (i as f64 + 0.5) * h;
        (-x * t.cosh()).exp() * t.cosh() * h
    }).sum();
    x * k1
}

#[test]
fn simulated_correlation_at_range() {
    let oracle = matern_at_range();
    assert!((oracle - 0.139).abs() < 2e-3);
    let range = 1.5;
    let params = SpdeParams::from_range_sd(range, 1.0);
    let mut r = rng(14);
    let side = 8.0;
    let seeds: Vec<Point2> = (0..=8)
        .flat_map(|i| (0..=8).map(move |j| Point2::new(side * i as f64 / 8.0, side * j as f64 / 8.0)))
        .collect();
    let mesh = build_mesh(&seeds, &MeshConfig::new(0.25, 1.0, 0.0).with_extension(3.0)).unwrap();
    let fem = fem_matrices(&mesh);
    let q = assemble_precision(&fem, &params).unwrap();
    let chol = SparseCholesky::factor(q.matrix()).unwrap();
    let centre = Point2::new(side / 2.0, side / 2.0);
    let v = mesh.vertices();
    let pairs: Vec<(usize, usize)> = (0..v.len())
        .filter(|&i| v[i].distance(&centre) < 1.5)
        .flat_map(|i| (0..v.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| (v[i].distance(&v[j]) - range).abs() < 0.05 * range)
        .collect();
    assert!(pairs.len() > 50);
    let samples = 400;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for _ in 0..samples {
        let z = normals(&mut r, v.len());
        let x = chol.sample(&z);
        for &(i, j) in &pairs {
            sxy += x[i] * x[j];
            sxx += x[i] * x[i];
            syy += x[j] * x[j];
        }
    }
    let corr = sxy / (sxx * syy).sqrt();
    assert!((0.05..=0.25).contains(&corr), "correlation {corr}");
}
