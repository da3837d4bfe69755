use super::fit::{response_scale, FitResult};
use super::{design_triplets, fixed_columns, ModelError};
use crate::formula::Family;
use crate::linalg::CsrMatrix;
use crate::mesh::{make_projector, Mesh, Point2};
use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// Predictive mean on the response scale (probability for Bernoulli).
    pub mean: f64,
    /// Predictive sd: latent plus noise for the normal family, delta-method
    /// probability sd for Bernoulli.
    pub sd: f64,
    pub latent_mean: f64,
    pub latent_sd: f64,
}

/// Posterior predictive summaries at new locations.
///
/// `covariates` must contain every covariate of the fitted formula. The mesh is
/// needed only for spatial fits.
pub fn predict(
    fit: &FitResult,
    mesh: Option<&Mesh>,
    coords: &[Point2],
    covariates: &[(String, Vec<f64>)],
) -> Result<Vec<Prediction>, ModelError> {
    let spec = &fit.summary.spec;
    let n = coords.len();
    let nu = fit.summary.u.len();
    let projector = if spec.spatial {
        let mesh = mesh.ok_or(ModelError::MissingSpatialInputs)?;
        let p = make_projector(mesh, coords);
        if let Some(row) = p.first_outside() {
            return Err(ModelError::PredictionOutsideMesh(row));
        }
        if p.matrix().ncols() != nu {
            return Err(ModelError::ProjectorMismatch { expected: nu, got: p.matrix().ncols() });
        }
        Some(p)
    } else {
        None
    };
    let fixed = fixed_columns(spec, n, |name| {
        covariates.iter().find(|(c, _)| c == name).map(|(_, v)| v.as_slice())
    })?;
    let rows = CsrMatrix::from_triplets(n, nu + fixed.len(), &design_triplets(n, projector.as_ref(), &fixed, nu));
    let noise_var = fit.posterior.noise_precision().map_or(0.0, |p| 1.0 / p);
    Ok((0..n)
        .map(|i| {
            let (cols, vals) = rows.row(i);
            let row: Vec<(usize, f64)> = cols.iter().copied().zip(vals.iter().copied()).collect();
            let (latent_mean, var) = fit.posterior.linear_combination(&row);
            let latent_sd = var.max(0.0).sqrt();
            match spec.family {
                Family::Normal => Prediction {
                    mean: latent_mean,
                    sd: (var.max(0.0) + noise_var).sqrt(),
                    latent_mean,
                    latent_sd,
                },
                Family::Bernoulli => {
                    let r = response_scale(latent_mean, latent_sd, fit.summary.diagnostics.separation);
                    Prediction { mean: r.mean, sd: r.sd, latent_mean, latent_sd }
                }
            }
        })
        .collect())
}
