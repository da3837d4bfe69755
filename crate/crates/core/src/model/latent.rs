use super::{Assembly, ModelError, Priors};
use crate::formula::Family;
use crate::linalg::{CsrMatrix, Permutation, SelectedInverse, SparseCholesky, SymbolicEnvelope};
use crate::mesh::FemMatrices;
use crate::spde::{SpdeOperators, SpdeParams};
use crate::stats::{log1p_exp, sigmoid, LN_2PI};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

const NEWTON_TOL: f64 = 1e-8;
const NEWTON_MAX_ITERS: usize = 50;

/// Precomputed structure for repeated evaluation of the hyperparameter objective on
/// one assembly: operator patterns, the fill-reducing ordering of the posterior
/// precision, and per-observation scatter positions for `Mᵀ W M`.
///
/// Hyperparameters are ordered `(log κ, log τ)` for spatial models, followed by the
/// log noise precision for the normal family.
#[derive(Debug, Clone)]
pub struct LatentModel {
    family: Family,
    design: CsrMatrix,
    y: Vec<f64>,
    nu: usize,
    np: usize,
    ops: Option<SpdeOperators>,
    sym_u: Option<SymbolicEnvelope>,
    post_pattern: CsrMatrix,
    q_to_post: Vec<usize>,
    fixed_diag: Vec<usize>,
    row_pairs: Vec<Vec<(usize, f64)>>,
    sym_post: SymbolicEnvelope,
    priors: Priors,
    prior_mean: Vec<f64>,
}

/// Gaussian (or Laplace) posterior of the latent vector at fixed hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPosterior {
    mean: Vec<f64>,
    chol: SparseCholesky,
    selinv: SelectedInverse,
    noise_precision: Option<f64>,
}

impl LatentPosterior {
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Observation noise precision (normal family only).
    pub fn noise_precision(&self) -> Option<f64> {
        self.noise_precision
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.selinv.get(i, i).unwrap()
    }

    pub fn marginal_variances(&self) -> Vec<f64> {
        self.selinv.diagonal()
    }

    /// Mean and variance of `rᵀ x` for a sparse row `r`.
    pub fn linear_combination(&self, row: &[(usize, f64)]) -> (f64, f64) {
        let mean = row.iter().map(|&(j, v)| v * self.mean[j]).sum();
        let mut var = 0.0;
        for &(a, va) in row {
            for &(b, vb) in row {
                match self.selinv.get(a, b) {
                    Some(s) => var += va * vb * s,
                    None => return (mean, self.chol.inverse_quadratic_form(row)),
                }
            }
        }
        (mean, var)
    }

    /// Posterior precision factor.
    pub fn cholesky(&self) -> &SparseCholesky {
        &self.chol
    }
}

struct Evaluation {
    log_marginal: f64,
    mean: Vec<f64>,
    chol: SparseCholesky,
    chol_u: Option<SparseCholesky>,
    q_u: Option<CsrMatrix>,
    noise_precision: Option<f64>,
}

/// `log p(y | θ) + log p(θ)` for the normal family.
pub fn log_marginal_gaussian(
    assembly: &Assembly,
    fem: Option<&FemMatrices>,
    theta: &[f64],
    priors: &Priors,
) -> Result<f64, ModelError> {
    LatentModel::new(assembly, fem, Family::Normal, priors)?.log_posterior(theta)
}

impl LatentModel {
    pub fn new(
        assembly: &Assembly,
        fem: Option<&FemMatrices>,
        family: Family,
        priors: &Priors,
    ) -> Result<Self, ModelError> {
        let layout = assembly.layout();
        let (nu, np) = (layout.spatial.len(), layout.fixed.len());
        priors.validate(np)?;
        let ops = if layout.is_spatial() {
            let fem = fem.ok_or(ModelError::MissingSpatialInputs)?;
            if fem.n_vertices() != nu {
                return Err(ModelError::ProjectorMismatch { expected: nu, got: fem.n_vertices() });
            }
            Some(SpdeOperators::new(fem))
        } else {
            None
        };
        if family == Family::Bernoulli {
            if let Some(row) = assembly.response().iter().position(|&y| y != 0.0 && y != 1.0) {
                return Err(ModelError::NonBinaryResponse(row));
            }
        }
        let design = assembly.design().clone();
        let d = nu + np;

        // Posterior precision pattern: Q_u block, MᵀM, fixed-effect diagonal.
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        if let Some(ops) = &ops {
            triplets.extend(ops.pattern().iter().map(|(i, j, _)| (i, j, 0.0)));
        }
        triplets.extend((nu..d).map(|i| (i, i, 0.0)));
        for i in 0..design.nrows() {
            let (cols, _) = design.row(i);
            for &a in cols {
                for &b in cols {
                    triplets.push((a, b, 0.0));
                }
            }
        }
        let post_pattern = CsrMatrix::from_triplets(d, d, &triplets);
        let q_to_post = ops
            .as_ref()
            .map(|ops| ops.pattern().iter().map(|(i, j, _)| post_pattern.position(i, j).unwrap()).collect())
            .unwrap_or_default();
        let fixed_diag = (nu..d).map(|i| post_pattern.position(i, i).unwrap()).collect();
        let row_pairs = (0..design.nrows())
            .map(|i| {
                let (cols, vals) = design.row(i);
                let mut pairs = Vec::with_capacity(cols.len() * cols.len());
                for (&a, &va) in cols.iter().zip(vals) {
                    for (&b, &vb) in cols.iter().zip(vals) {
                        pairs.push((post_pattern.position(a, b).unwrap(), va * vb));
                    }
                }
                pairs
            })
            .collect();

        // Fill-reducing order on the field block; fixed effects go last as dense rows.
        let (sym_u, order) = match &ops {
            Some(ops) => {
                let sym = SymbolicEnvelope::analyze(&ops.pattern().adjacency());
                let perm = sym.permutation();
                let order: Vec<usize> = (0..nu).map(|k| perm.old_index(k)).chain(nu..d).collect();
                (Some(sym), order)
            }
            None => (None, (0..d).collect()),
        };
        let mut sym_post = SymbolicEnvelope::with_permutation(&post_pattern.adjacency(), Permutation::from_order(order));
        sym_post.make_rows_dense(nu..d);

        let mut prior_mean = vec![0.0; d];
        if !priors.fixed_mean.is_empty() {
            prior_mean[nu..].copy_from_slice(&priors.fixed_mean);
        }
        Ok(LatentModel {
            family,
            design,
            y: assembly.response().to_vec(),
            nu,
            np,
            ops,
            sym_u,
            post_pattern,
            q_to_post,
            fixed_diag,
            row_pairs,
            sym_post,
            priors: priors.clone(),
            prior_mean,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn is_spatial(&self) -> bool {
        self.ops.is_some()
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.nu + self.np
    }

    pub fn n_theta(&self) -> usize {
        2 * usize::from(self.is_spatial()) + usize::from(self.family == Family::Normal)
    }

    pub fn theta_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.is_spatial() {
            names.push("log_kappa".into());
            names.push("log_tau".into());
        }
        if self.family == Family::Normal {
            names.push("log_noise_precision".into());
        }
        names
    }

    /// Gaussian prior `(mean, sd)` of each hyperparameter.
    pub fn theta_priors(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        if self.is_spatial() {
            let s = &self.priors.spde;
            out.push((s.mean.1, s.sd.1));
            out.push((s.mean.0, s.sd.0));
        }
        if self.family == Family::Normal {
            out.push(self.priors.noise_log_precision);
        }
        out
    }

    pub fn prior_mean_theta(&self) -> Vec<f64> {
        self.theta_priors().iter().map(|p| p.0).collect()
    }

    pub fn priors(&self) -> &Priors {
        &self.priors
    }

    fn check_theta(&self, theta: &[f64]) -> Result<(), ModelError> {
        if theta.len() != self.n_theta() {
            return Err(ModelError::ThetaLength { expected: self.n_theta(), got: theta.len() });
        }
        Ok(())
    }

    fn spde_params(&self, theta: &[f64]) -> Option<SpdeParams> {
        self.is_spatial().then(|| SpdeParams::new(theta[1], theta[0]))
    }

    fn noise_precision(&self, theta: &[f64]) -> Option<f64> {
        (self.family == Family::Normal).then(|| theta[theta.len() - 1].exp())
    }

    fn theta_log_prior(&self, theta: &[f64]) -> f64 {
        self.theta_priors()
            .iter()
            .zip(theta)
            .map(|(&(m, s), &t)| {
                let z = (t - m) / s;
                -0.5 * LN_2PI - s.ln() - 0.5 * z * z
            })
            .sum()
    }

    fn factor_error(theta: &[f64]) -> impl Fn(crate::linalg::LinalgError) -> ModelError + '_ {
        move |source| ModelError::Factorization { theta: theta.to_vec(), source }
    }

    /// `Q_prior + Mᵀ diag(w) M`.
    fn posterior_precision(&self, q_u: Option<&CsrMatrix>, weights: &[f64]) -> CsrMatrix {
        let mut m = self.post_pattern.clone();
        let vals = m.values_mut();
        if let Some(q) = q_u {
            for (k, v) in q.values().iter().enumerate() {
                vals[self.q_to_post[k]] += v;
            }
        }
        for &pos in &self.fixed_diag {
            vals[pos] += self.priors.fixed_precision;
        }
        for (pairs, &w) in self.row_pairs.iter().zip(weights) {
            for &(pos, c) in pairs {
                vals[pos] += w * c;
            }
        }
        m
    }

    /// `Q_prior v`.
    fn prior_times(&self, q_u: Option<&CsrMatrix>, v: &[f64]) -> Vec<f64> {
        let mut out = match q_u {
            Some(q) => q.mul_vec(&v[..self.nu]),
            None => Vec::new(),
        };
        out.extend(v[self.nu..].iter().map(|x| self.priors.fixed_precision * x));
        out
    }

    fn prior_factor(
        &self,
        theta: &[f64],
    ) -> Result<(Option<CsrMatrix>, Option<SparseCholesky>, f64), ModelError> {
        let mut log_det = self.np as f64 * self.priors.fixed_precision.ln();
        match (self.spde_params(theta), &self.ops, &self.sym_u) {
            (Some(params), Some(ops), Some(sym)) => {
                let q = ops.precision(&params)?;
                let chol = SparseCholesky::factor_with(sym, &q).map_err(Self::factor_error(theta))?;
                log_det += chol.log_det();
                Ok((Some(q), Some(chol), log_det))
            }
            _ => Ok((None, None, log_det)),
        }
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Evaluation, ModelError> {
        self.check_theta(theta)?;
        match self.family {
            Family::Normal => self.evaluate_gaussian(theta),
            Family::Bernoulli => self.evaluate_laplace(theta),
        }
    }

    fn evaluate_gaussian(&self, theta: &[f64]) -> Result<Evaluation, ModelError> {
        let n = self.n_obs() as f64;
        let prec = self.noise_precision(theta).unwrap();
        let (q_u, chol_u, prior_log_det) = self.prior_factor(theta)?;
        let q_post = self.posterior_precision(q_u.as_ref(), &vec![prec; self.n_obs()]);
        let chol = SparseCholesky::factor_with(&self.sym_post, &q_post).map_err(Self::factor_error(theta))?;
        let qp_mu = self.prior_times(q_u.as_ref(), &self.prior_mean);
        let b: Vec<f64> = self
            .design
            .transpose_mul_vec(&self.y)
            .iter()
            .zip(&qp_mu)
            .map(|(my, q)| prec * my + q)
            .collect();
        let mean = chol.solve(&b);
        // Minimum of prec‖y − Mx‖² + (x − μp)ᵀQp(x − μp), attained at the posterior mean.
        let fitted = self.design.mul_vec(&mean);
        let rss: f64 = self.y.iter().zip(&fitted).map(|(y, f)| (y - f) * (y - f)).sum();
        let dev: Vec<f64> = mean.iter().zip(&self.prior_mean).map(|(m, p)| m - p).collect();
        let prior_quad: f64 = self.prior_times(q_u.as_ref(), &dev).iter().zip(&dev).map(|(a, b)| a * b).sum();
        let log_lik = -0.5 * n * LN_2PI + 0.5 * prior_log_det + 0.5 * n * prec.ln()
            - 0.5 * chol.log_det()
            - 0.5 * (prec * rss + prior_quad);
        Ok(Evaluation {
            log_marginal: log_lik + self.theta_log_prior(theta),
            mean,
            chol,
            chol_u,
            q_u,
            noise_precision: Some(prec),
        })
    }

    fn bernoulli_objective(&self, q_u: Option<&CsrMatrix>, x: &[f64]) -> (f64, Vec<f64>) {
        let eta = self.design.mul_vec(x);
        let log_lik: f64 = self.y.iter().zip(&eta).map(|(y, e)| y * e - log1p_exp(*e)).sum();
        let dev: Vec<f64> = x.iter().zip(&self.prior_mean).map(|(a, b)| a - b).collect();
        let quad: f64 = self.prior_times(q_u, &dev).iter().zip(&dev).map(|(a, b)| a * b).sum();
        (log_lik - 0.5 * quad, eta)
    }

    fn evaluate_laplace(&self, theta: &[f64]) -> Result<Evaluation, ModelError> {
        let (q_u, chol_u, prior_log_det) = self.prior_factor(theta)?;
        let q_u_ref = q_u.as_ref();
        let mut x = self.prior_mean.clone();
        let (mut value, mut eta) = self.bernoulli_objective(q_u_ref, &x);
        let mut gradient_norm = f64::INFINITY;
        for _ in 0..=NEWTON_MAX_ITERS {
            let p: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
            let w: Vec<f64> = p.iter().map(|p| p * (1.0 - p)).collect();
            let resid: Vec<f64> = self.y.iter().zip(&p).map(|(y, p)| y - p).collect();
            let dev: Vec<f64> = x.iter().zip(&self.prior_mean).map(|(a, b)| a - b).collect();
            let grad: Vec<f64> = self
                .design
                .transpose_mul_vec(&resid)
                .iter()
                .zip(self.prior_times(q_u_ref, &dev))
                .map(|(a, b)| a - b)
                .collect();
            let h = self.posterior_precision(q_u_ref, &w);
            let chol = SparseCholesky::factor_with(&self.sym_post, &h).map_err(Self::factor_error(theta))?;
            gradient_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            if gradient_norm < NEWTON_TOL {
                let log_marginal = value + 0.5 * prior_log_det - 0.5 * chol.log_det() + self.theta_log_prior(theta);
                return Ok(Evaluation {
                    log_marginal,
                    mean: x,
                    chol,
                    chol_u,
                    q_u,
                    noise_precision: None,
                });
            }
            let step = chol.solve(&grad);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + t * s).collect();
                let (v, e) = self.bernoulli_objective(q_u_ref, &trial);
                if v >= value - 1e-12 * value.abs() {
                    x = trial;
                    value = v;
                    eta = e;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Err(ModelError::NewtonDiverged { theta: theta.to_vec(), gradient_norm })
    }

    /// Approximate `log p(y | θ) + log p(θ)`: exact for the normal family, Laplace
    /// for Bernoulli.
    pub fn log_posterior(&self, theta: &[f64]) -> Result<f64, ModelError> {
        Ok(self.evaluate(theta)?.log_marginal)
    }

    /// Latent posterior at `theta`.
    pub fn posterior(&self, theta: &[f64]) -> Result<LatentPosterior, ModelError> {
        let e = self.evaluate(theta)?;
        let selinv = e.chol.selected_inverse();
        Ok(LatentPosterior { mean: e.mean, chol: e.chol, selinv, noise_precision: e.noise_precision })
    }

    /// Posterior together with the objective value at `theta`.
    pub(crate) fn posterior_with_value(&self, theta: &[f64]) -> Result<(LatentPosterior, f64), ModelError> {
        let e = self.evaluate(theta)?;
        let selinv = e.chol.selected_inverse();
        let value = e.log_marginal;
        Ok((LatentPosterior { mean: e.mean, chol: e.chol, selinv, noise_precision: e.noise_precision }, value))
    }

    /// Value and analytic gradient of the normal-family objective.
    ///
    /// For a parameter entering `Q_u`, the derivative of `log p(y|θ)` is
    /// `½ tr(Q_u⁻¹ Q') − ½ μ_uᵀ Q' μ_u − ½ tr(Q' Σ_uu)`; for the noise log precision it
    /// is `n/2 − ½ prec (‖y − Mμ‖² + Σ_i m_iᵀ Σ m_i)`. Traces only need entries of the
    /// inverses on the pattern of `Q'`, which the selected inversion provides.
    pub fn log_posterior_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>), ModelError> {
        if self.family != Family::Normal {
            return Err(ModelError::WrongFamily { expected: Family::Normal, got: self.family });
        }
        let e = self.evaluate(theta)?;
        let sigma = e.chol.selected_inverse();
        let mut grad = Vec::with_capacity(theta.len());
        if let (Some(ops), Some(q_u), Some(chol_u)) = (&self.ops, &e.q_u, &e.chol_u) {
            let params = self.spde_params(theta).unwrap();
            let mu_u = &e.mean[..self.nu];
            let trace_post = |dq: &CsrMatrix| -> f64 { dq.iter().map(|(i, j, v)| v * sigma.get(i, j).unwrap()).sum() };
            let quad = |dq: &CsrMatrix| -> f64 { dq.mul_vec(mu_u).iter().zip(mu_u).map(|(a, b)| a * b).sum() };

            let dq_kappa = ops.d_precision_d_log_kappa(&params)?;
            let prior_inv = chol_u.selected_inverse();
            let trace_prior: f64 = dq_kappa.iter().map(|(i, j, v)| v * prior_inv.get(i, j).unwrap()).sum();
            grad.push(0.5 * trace_prior - 0.5 * quad(&dq_kappa) - 0.5 * trace_post(&dq_kappa));
            // ∂Q/∂log τ = 2Q.
            grad.push(self.nu as f64 - quad(q_u) - trace_post(q_u));
        }
        let prec = e.noise_precision.unwrap();
        let fitted = self.design.mul_vec(&e.mean);
        let rss: f64 = self.y.iter().zip(&fitted).map(|(y, f)| (y - f) * (y - f)).sum();
        let mut trace = 0.0;
        for i in 0..self.design.nrows() {
            let (cols, vals) = self.design.row(i);
            for (&a, &va) in cols.iter().zip(vals) {
                for (&b, &vb) in cols.iter().zip(vals) {
                    trace += va * vb * sigma.get(a, b).unwrap();
                }
            }
        }
        grad.push(0.5 * self.n_obs() as f64 - 0.5 * prec * (rss + trace));
        for ((g, &(m, s)), &t) in grad.iter_mut().zip(&self.theta_priors()).zip(theta) {
            *g -= (t - m) / (s * s);
        }
        Ok((e.log_marginal, grad))
    }
}
