mod common;

use common::*;
use geocv_core::formula::{Family, ModelSpec};
use geocv_core::mesh::Point2;
use geocv_core::model::{
    assemble, fit, fit_bernoulli, log_marginal_gaussian, predict, Dataset, FitConfig, LatentModel, Priors,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

struct DenseOracle {
    log_marginal: f64,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

/// Covariance-form Gaussian algebra: y ~ N(Mμp, M Σp Mᵀ + I/prec), then the
/// conditional of x given y.
fn dense_oracle(t: &Toy, theta: &[f64]) -> DenseOracle {
    let m = dense(t.assembly.design());
    let n = m.nrows();
    let prec = theta[theta.len() - 1].exp();
    let sigma_p = dense_prior_precision(t, theta).try_inverse().unwrap();
    let mu_p = DVector::zeros(m.ncols());
    let cov_y = &m * &sigma_p * m.transpose() + DMatrix::identity(n, n) / prec;
    let y = DVector::from_column_slice(t.assembly.response());
    let r = &y - &m * &mu_p;
    let chol = cov_y.clone().cholesky().unwrap();
    let alpha = chol.solve(&r);
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let log_lik = -0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det - 0.5 * r.dot(&alpha);
    let model = LatentModel::new(&t.assembly, Some(&t.fem), Family::Normal, &t.priors).unwrap();
    let gain = &sigma_p * m.transpose() * chol.inverse();
    // Precision form for the covariance: the covariance-form update cancels badly
    // on weakly constrained fixed effects.
    let q_post = dense_prior_precision(t, theta) + m.transpose() * &m * prec;
    DenseOracle {
        log_marginal: log_lik + gaussian_log_prior(theta, &model.theta_priors()),
        mean: &mu_p + &gain * r,
        cov: q_post.cholesky().unwrap().inverse(),
    }
}

fn random_theta(r: &mut impl Rng, spatial: bool) -> Vec<f64> {
    let mut t = Vec::new();
    if spatial {
        t.push(r.random_range(-0.5..1.5));
        t.push(r.random_range(-1.0..1.0));
    }
    t.push(r.random_range(-1.0..2.0));
    t
}

#[test]
fn gaussian_algebra_matches_dense_oracle() {
    for seed in 0..10 {
        let t = toy(seed, 12, "y ~ x + spatial");
        let mut r = rng(1000 + seed);
        let theta = random_theta(&mut r, true);
        let oracle = dense_oracle(&t, &theta);
        let model = LatentModel::new(&t.assembly, Some(&t.fem), Family::Normal, &t.priors).unwrap();
        let lml = model.log_posterior(&theta).unwrap();
        assert!(rel_err(lml, oracle.log_marginal) < 1e-8, "seed {seed}: {lml} vs {}", oracle.log_marginal);
        let post = model.posterior(&theta).unwrap();
        for i in 0..post.dim() {
            assert!(rel_err(post.mean()[i], oracle.mean[i]) < 1e-8 || (post.mean()[i] - oracle.mean[i]).abs() < 1e-12);
            assert!(rel_err(post.variance(i), oracle.cov[(i, i)]) < 1e-8, "seed {seed} i {i}: {} vs {}", post.variance(i), oracle.cov[(i, i)]);
        }
    }
}

#[test]
fn scalar_convolution_density() {
    // y ~ N(β, 1), β ~ N(0, 1) ⇒ y ~ N(0, 2).
    let data = Dataset::new(vec![Point2::new(0.0, 0.0)], vec![0.7], vec![]).unwrap();
    let spec: ModelSpec = "y ~ 1".parse().unwrap();
    let asm = assemble(&data, &spec, None).unwrap();
    let priors = Priors {
        fixed_precision: 1.0,
        noise_log_precision: (0.0, 1.0),
        ..Priors::default_for(data.coords(), data.response(), Family::Normal)
    };
    let lml = log_marginal_gaussian(&asm, None, &[0.0], &priors).unwrap();
    let expected = -0.5 * (2.0 * std::f64::consts::PI * 2.0).ln() - 0.7f64.powi(2) / 4.0
        + gaussian_log_prior(&[0.0], &[(0.0, 1.0)]);
    assert!((lml - expected).abs() < 1e-12, "{lml} vs {expected}");
}

#[test]
fn shift_invariance_with_shifted_prior_mean() {
    let t = toy(3, 10, "y ~ 1 + spatial");
    let c = 7.5;
    let shifted = Dataset::new(
        t.data.coords().to_vec(),
        t.data.response().iter().map(|y| y + c).collect(),
        t.data.covariates().to_vec(),
    )
    .unwrap();
    let proj = geocv_core::mesh::make_projector(&t.mesh, shifted.coords());
    let asm2 = assemble(&shifted, &t.spec, Some(&proj)).unwrap();
    for precision in [1e-8, 1e-3] {
        let p1 = Priors { fixed_precision: precision, ..t.priors.clone() };
        let p2 = Priors { fixed_mean: vec![c], ..p1.clone() };
        let theta = [0.5, -0.2, 1.0];
        let a = log_marginal_gaussian(&t.assembly, Some(&t.fem), &theta, &p1).unwrap();
        let b = log_marginal_gaussian(&asm2, Some(&t.fem), &theta, &p2).unwrap();
        assert!((a - b).abs() < 1e-8 * a.abs(), "{a} vs {b}");
        // Under an (almost) flat prior the unshifted prior mean barely matters.
        if precision == 1e-8 {
            let b0 = log_marginal_gaussian(&asm2, Some(&t.fem), &theta, &p1).unwrap();
            assert!((a - b0).abs() < 1e-5, "{a} vs {b0}");
        }
    }
}

#[test]
fn intercept_only_recovers_sample_mean() {
    let mut r = rng(9);
    let n = 40;
    let pts = uniform_points(&mut r, n);
    let y: Vec<f64> = normals(&mut r, n).iter().map(|z| 3.0 + 2.0 * z).collect();
    let data = Dataset::new(pts, y.clone(), vec![]).unwrap();
    let spec: ModelSpec = "y ~ 1".parse().unwrap();
    let asm = assemble(&data, &spec, None).unwrap();
    let mut priors = Priors::default_for(data.coords(), &y, Family::Normal);
    priors.fixed_precision = 1e-8;
    let res = fit(&asm, None, &spec, &FitConfig::new(priors)).unwrap();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let beta = res.summary.beta[0];
    assert!((beta.mean - ybar).abs() < 1e-8, "{} vs {ybar}", beta.mean);
    let sigma = res.summary.noise_sd.unwrap();
    assert!((beta.sd - sigma / (n as f64).sqrt()).abs() < 1e-6);
}

#[test]
fn fit_is_deterministic_and_fitted_equals_linear_predictor() {
    let t = toy(5, 20, "y ~ x + spatial");
    let cfg = FitConfig::new(t.priors.clone());
    let a = fit(&t.assembly, Some(&t.fem), &t.spec, &cfg).unwrap();
    let b = fit(&t.assembly, Some(&t.fem), &t.spec, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.summary.fitted, a.summary.linear_predictor);
    assert!(a.summary.u.iter().chain(&a.summary.beta).all(|e| e.sd > 0.0));
}

#[test]
fn posterior_mean_solves_normal_equations() {
    let t = toy(6, 15, "y ~ x + spatial");
    let theta = [0.3, 0.1, 1.2];
    let model = LatentModel::new(&t.assembly, Some(&t.fem), Family::Normal, &t.priors).unwrap();
    let post = model.posterior(&theta).unwrap();
    let m = dense(t.assembly.design());
    let prec = theta[2].exp();
    let q_post = dense_prior_precision(&t, &theta) + m.transpose() * &m * prec;
    let b = m.transpose() * DVector::from_column_slice(t.assembly.response()) * prec;
    let resid = &q_post * DVector::from_column_slice(post.mean()) - &b;
    assert!(resid.amax() <= 1e-8 * b.amax());
}

#[test]
fn gradient_matches_central_differences() {
    for seed in 0..5 {
        let t = toy(20 + seed, 15, "y ~ x + spatial");
        let model = LatentModel::new(&t.assembly, Some(&t.fem), Family::Normal, &t.priors).unwrap();
        let theta = random_theta(&mut rng(seed), true);
        let (_, g) = model.log_posterior_gradient(&theta).unwrap();
        let h = 1e-5;
        for i in 0..3 {
            let mut tp = theta.clone();
            tp[i] += h;
            let mut tm = theta.clone();
            tm[i] -= h;
            let fd = (model.log_posterior(&tp).unwrap() - model.log_posterior(&tm).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-4 * g[i].abs().max(1.0), "seed {seed} comp {i}: fd {fd} vs {}", g[i]);
        }
    }
}

#[test]
fn predictions_match_dense_conditional() {
    let t = toy(11, 10, "y ~ x + spatial");
    let res = fit(&t.assembly, Some(&t.fem), &t.spec, &FitConfig::new(t.priors.clone())).unwrap();
    let oracle = dense_oracle(&t, &res.summary.theta_hat);
    let mut r = rng(77);
    // Convex combinations of data points stay inside the mesh.
    let pts = t.data.coords();
    let locs: Vec<Point2> = (0..8)
        .map(|_| {
            let (a, b, c) = (r.random_range(0..10), r.random_range(0..10), r.random::<f64>());
            Point2::new(c * pts[a].x + (1.0 - c) * pts[b].x, c * pts[a].y + (1.0 - c) * pts[b].y)
        })
        .collect();
    let xs = normals(&mut r, 8);
    let preds = predict(&res, Some(&t.mesh), &locs, &[("x".into(), xs.clone())]).unwrap();
    let proj = geocv_core::mesh::make_projector(&t.mesh, &locs);
    let nu = t.fem.n_vertices();
    let prec = res.summary.theta_hat[2].exp();
    for (i, p) in preds.iter().enumerate() {
        let mut row = DVector::zeros(nu + 2);
        let (cols, vals) = proj.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            row[c] = v;
        }
        row[nu] = 1.0;
        row[nu + 1] = xs[i];
        let mean = row.dot(&oracle.mean);
        let var = (row.transpose() * &oracle.cov * &row)[(0, 0)] + 1.0 / prec;
        assert!(rel_err(p.mean, mean) < 1e-8, "{} vs {mean}", p.mean);
        assert!(rel_err(p.sd, var.sqrt()) < 1e-8);
    }
    // At a training location the mean is the fitted value.
    let train = predict(&res, Some(&t.mesh), &t.data.coords()[..3], &[("x".into(), t.data.column("x").unwrap()[..3].to_vec())])
        .unwrap();
    for i in 0..3 {
        assert!((train[i].mean - res.summary.fitted[i].mean).abs() < 1e-10);
    }
}

#[test]
fn covariate_scaling_rescales_beta() {
    let t = toy(12, 25, "y ~ x");
    let mut priors = t.priors.clone();
    priors.fixed_precision = 1e-8;
    let scaled = Dataset::new(
        t.data.coords().to_vec(),
        t.data.response().to_vec(),
        vec![("x".into(), t.data.column("x").unwrap().iter().map(|v| 4.0 * v).collect())],
    )
    .unwrap();
    let asm2 = assemble(&scaled, &t.spec, None).unwrap();
    let a = fit(&t.assembly, None, &t.spec, &FitConfig::new(priors.clone())).unwrap();
    let b = fit(&asm2, None, &t.spec, &FitConfig::new(priors)).unwrap();
    assert!((a.summary.beta[1].mean - 4.0 * b.summary.beta[1].mean).abs() < 1e-6);
    assert!((a.summary.beta[0].mean - b.summary.beta[0].mean).abs() < 1e-6);
}

#[test]
fn slices_peak_at_mode() {
    let t = toy(13, 20, "y ~ x + spatial");
    let res = fit(&t.assembly, Some(&t.fem), &t.spec, &FitConfig::new(t.priors.clone())).unwrap();
    assert_eq!(res.summary.hyper_slices.len(), 3);
    for s in &res.summary.hyper_slices {
        assert_eq!(s.grid.len(), 41);
        let argmax = (0..41).max_by(|&a, &b| s.log_posterior[a].total_cmp(&s.log_posterior[b])).unwrap();
        let nearest = (0..41).min_by(|&a, &b| (s.grid[a] - s.theta_hat).abs().total_cmp(&(s.grid[b] - s.theta_hat).abs())).unwrap();
        assert_eq!(argmax, nearest, "{}", s.name);
    }
}

fn bernoulli_data(ones: usize, n: usize) -> (Dataset, ModelSpec) {
    let pts: Vec<Point2> = (0..n).map(|i| Point2::new(i as f64, (i * i % 7) as f64)).collect();
    let y = (0..n).map(|i| if i < ones { 1.0 } else { 0.0 }).collect();
    (Dataset::new(pts, y, vec![]).unwrap(), "y ~ 1".parse::<ModelSpec>().unwrap().with_family(Family::Bernoulli))
}

#[test]
fn bernoulli_intercept_matches_logistic_mle() {
    let (data, spec) = bernoulli_data(7, 10);
    let asm = assemble(&data, &spec, None).unwrap();
    let mut priors = Priors::default_for(data.coords(), data.response(), Family::Bernoulli);
    priors.fixed_precision = 1e-8;
    let res = fit_bernoulli(&asm, None, &spec, &FitConfig::new(priors)).unwrap();
    assert!((res.summary.fitted[0].mean - 0.7).abs() < 0.02, "{}", res.summary.fitted[0].mean);
    assert!((res.summary.beta[0].mean - (0.7f64 / 0.3).ln()).abs() < 1e-6);
    assert!(res.summary.diagnostics.warnings.is_empty());
}

#[test]
fn bernoulli_all_zero_flags_separation() {
    let (data, spec) = bernoulli_data(0, 10);
    let asm = assemble(&data, &spec, None).unwrap();
    let priors = Priors::default_for(data.coords(), data.response(), Family::Bernoulli);
    let res = fit_bernoulli(&asm, None, &spec, &FitConfig::new(priors)).unwrap();
    assert!(res.summary.fitted.iter().all(|f| f.mean < 0.1));
    assert_eq!(res.summary.diagnostics.warnings.len(), 1);
}

#[test]
fn laplace_marginal_close_to_quadrature() {
    // n = 4, intercept + slope; integrate the exact joint over β on a fine grid.
    let pts: Vec<Point2> = (0..4).map(|i| Point2::new(i as f64, 0.0)).collect();
    let x = vec![-1.0, -0.3, 0.4, 1.2];
    let y = vec![0.0, 1.0, 0.0, 1.0];
    let data = Dataset::new(pts, y.clone(), vec![("x".into(), x.clone())]).unwrap();
    let spec = "y ~ x".parse::<ModelSpec>().unwrap().with_family(Family::Bernoulli);
    let asm = assemble(&data, &spec, None).unwrap();
    let mut priors = Priors::default_for(data.coords(), &y, Family::Bernoulli);
    priors.fixed_precision = 0.5;
    let model = LatentModel::new(&asm, None, Family::Bernoulli, &priors).unwrap();
    let laplace = model.log_posterior(&[]).unwrap();
    let (lo, hi, k) = (-12.0, 12.0, 1201);
    let h = (hi - lo) / (k - 1) as f64;
    let mut total = 0.0;
    for i in 0..k {
        for j in 0..k {
            let (b0, b1) = (lo + i as f64 * h, lo + j as f64 * h);
            let mut lp = 0.0;
            for r in 0..4 {
                let eta = b0 + b1 * x[r];
                lp += y[r] * eta - (1.0 + eta.exp()).ln();
            }
            lp += (0.5f64 / (2.0 * std::f64::consts::PI)).ln() - 0.25 * (b0 * b0 + b1 * b1);
            total += lp.exp() * h * h;
        }
    }
    assert!((laplace - total.ln()).abs() < 0.1, "laplace {laplace} vs quadrature {}", total.ln());
}
