//! Matérn (α = 2) SPDE precision matrices and their interpretable summaries.

use crate::linalg::CsrMatrix;
use crate::mesh::FemMatrices;
use crate::stats::LN_2PI;
use alloc::vec::Vec;
use core::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpdeError {
    #[error("non-finite SPDE parameters: tau = {tau}, kappa = {kappa}")]
    NonFinite { tau: f64, kappa: f64 },
    #[error("prior sd must be positive and finite, got {0}")]
    InvalidPriorSd(f64),
}

/// Hyperparameters `theta1 = log τ`, `theta2 = log κ`; smoothness α is fixed at 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdeParams {
    pub theta1: f64,
    pub theta2: f64,
}

impl SpdeParams {
    pub const ALPHA: u32 = 2;

    pub fn new(theta1: f64, theta2: f64) -> Self {
        SpdeParams { theta1, theta2 }
    }

    pub fn from_tau_kappa(tau: f64, kappa: f64) -> Self {
        SpdeParams { theta1: tau.ln(), theta2: kappa.ln() }
    }

    /// Parameters giving the requested range and marginal sd.
    pub fn from_range_sd(range: f64, sd: f64) -> Self {
        let kappa = 8f64.sqrt() / range;
        let tau = 1.0 / ((4.0 * PI).sqrt() * kappa * sd);
        Self::from_tau_kappa(tau, kappa)
    }

    pub fn tau(&self) -> f64 {
        self.theta1.exp()
    }

    pub fn kappa(&self) -> f64 {
        self.theta2.exp()
    }

    fn checked(&self) -> Result<(f64, f64), SpdeError> {
        let (tau, kappa) = (self.tau(), self.kappa());
        if tau.is_finite() && kappa.is_finite() && tau > 0.0 && kappa > 0.0 {
            Ok((tau, kappa))
        } else {
            Err(SpdeError::NonFinite { tau, kappa })
        }
    }
}

/// Sparse symmetric positive-definite GMRF precision over mesh vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionMatrix(pub CsrMatrix);

impl PrecisionMatrix {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CsrMatrix {
        self.0
    }
}

/// `Q = τ² (κ⁴ C + 2κ² G + G C⁻¹ G)`.
pub fn assemble_precision(fem: &FemMatrices, params: &SpdeParams) -> Result<PrecisionMatrix, SpdeError> {
    let ops = SpdeOperators::new(fem);
    ops.precision(params).map(PrecisionMatrix)
}

/// The three operators of the precision on one shared sparsity pattern, so that
/// repeated assembly for new parameters is a single pass over aligned arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdeOperators {
    pattern: CsrMatrix,
    c: Vec<f64>,
    g: Vec<f64>,
    gcg: Vec<f64>,
}

impl SpdeOperators {
    pub fn new(fem: &FemMatrices) -> Self {
        let n = fem.n_vertices();
        let inv_c: Vec<f64> = fem.c.iter().map(|c| 1.0 / c).collect();
        let gcg = fem.g.scale_columns(&inv_c).matmul(&fem.g);
        let mut triplets: Vec<(usize, usize, f64)> = fem.g.iter().chain(gcg.iter()).map(|(i, j, _)| (i, j, 0.0)).collect();
        triplets.extend((0..n).map(|i| (i, i, 0.0)));
        let pattern = CsrMatrix::from_triplets(n, n, &triplets);
        let spread = |m: &CsrMatrix| {
            let mut out = alloc::vec![0.0; pattern.nnz()];
            for (i, j, v) in m.iter() {
                out[pattern.position(i, j).unwrap()] += v;
            }
            out
        };
        let mut c = alloc::vec![0.0; pattern.nnz()];
        for (i, &ci) in fem.c.iter().enumerate() {
            c[pattern.position(i, i).unwrap()] = ci;
        }
        let g = spread(&fem.g);
        let gcg = spread(&gcg);
        SpdeOperators { pattern, c, g, gcg }
    }

    pub fn dim(&self) -> usize {
        self.pattern.nrows()
    }

    /// Shared pattern (values are zero).
    pub fn pattern(&self) -> &CsrMatrix {
        &self.pattern
    }

    fn combine(&self, a: f64, b: f64, d: f64) -> CsrMatrix {
        let mut m = self.pattern.clone();
        for (k, v) in m.values_mut().iter_mut().enumerate() {
            *v = a * self.c[k] + b * self.g[k] + d * self.gcg[k];
        }
        m
    }

    pub fn precision(&self, params: &SpdeParams) -> Result<CsrMatrix, SpdeError> {
        let (tau, kappa) = params.checked()?;
        let (t2, k2) = (tau * tau, kappa * kappa);
        Ok(self.combine(t2 * k2 * k2, 2.0 * t2 * k2, t2))
    }

    /// `∂Q/∂ log κ = τ² (4κ⁴ C + 4κ² G)`.
    pub fn d_precision_d_log_kappa(&self, params: &SpdeParams) -> Result<CsrMatrix, SpdeError> {
        let (tau, kappa) = params.checked()?;
        let (t2, k2) = (tau * tau, kappa * kappa);
        Ok(self.combine(4.0 * t2 * k2 * k2, 4.0 * t2 * k2, 0.0))
    }
}

/// Nominal range and marginal standard deviation of the field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdeSummaries {
    pub range: f64,
    pub marginal_sd: f64,
}

/// `range = √8 / κ`, `σ = 1 / √(4π κ² τ²)`.
pub fn spde_summaries(params: &SpdeParams) -> SpdeSummaries {
    let (tau, kappa) = (params.tau(), params.kappa());
    SpdeSummaries {
        range: 8f64.sqrt() / kappa,
        marginal_sd: 1.0 / (4.0 * PI * kappa * kappa * tau * tau).sqrt(),
    }
}

/// Independent Gaussian log-density of `(theta1, theta2)`.
pub fn theta_log_prior(
    params: &SpdeParams,
    prior_mean: (f64, f64),
    prior_sd: (f64, f64),
) -> Result<f64, SpdeError> {
    let mut total = 0.0;
    for (x, m, s) in [(params.theta1, prior_mean.0, prior_sd.0), (params.theta2, prior_mean.1, prior_sd.1)] {
        if !(s > 0.0) || !s.is_finite() {
            return Err(SpdeError::InvalidPriorSd(s));
        }
        let z = (x - m) / s;
        total += -0.5 * LN_2PI - s.ln() - 0.5 * z * z;
    }
    Ok(total)
}

/// Gaussian prior on `(theta1, theta2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdePrior {
    pub mean: (f64, f64),
    pub sd: (f64, f64),
}

impl SpdePrior {
    /// Prior range at 20% of the data hull diameter, prior marginal sd 1, sd 10 on
    /// both log-parameters.
    pub fn default_for_diameter(diameter: f64) -> Self {
        let p = SpdeParams::from_range_sd(0.2 * diameter, 1.0);
        SpdePrior { mean: (p.theta1, p.theta2), sd: (10.0, 10.0) }
    }

    pub fn mean_params(&self) -> SpdeParams {
        SpdeParams::new(self.mean.0, self.mean.1)
    }

    pub fn log_density(&self, params: &SpdeParams) -> Result<f64, SpdeError> {
        theta_log_prior(params, self.mean, self.sd)
    }
}
