use super::latent::{LatentModel, LatentPosterior};
use super::{Assembly, ModelError, Priors};
use crate::formula::{Family, ModelSpec};
use crate::mesh::FemMatrices;
use crate::optimize::{nelder_mead, Minimum, NelderMeadConfig};
use crate::spde::{spde_summaries, SpdeParams, SpdeSummaries};
use crate::stats::{logit_normal_mean, sigmoid};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

/// Largest absolute latent mode entry before a Bernoulli fit is flagged as separated.
const SEPARATION_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub priors: Priors,
    pub optimizer: NelderMeadConfig,
    /// Single optimizer start replacing the default prior-mean and dispersed starts.
    pub warm_start: Option<Vec<f64>>,
    /// Points per hyperparameter slice; 0 skips slices.
    pub slice_points: usize,
    /// Slice half-width in curvature standard deviations.
    pub slice_width: f64,
}

impl FitConfig {
    pub fn new(priors: Priors) -> Self {
        FitConfig {
            priors,
            optimizer: NelderMeadConfig::default(),
            warm_start: None,
            slice_points: 41,
            slice_width: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub sd: f64,
}

/// Objective along one hyperparameter with the others held at `θ̂`.
///
/// These are conditional slices at the mode, not integrated marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperSlice {
    pub name: String,
    pub theta_hat: f64,
    pub prior_mean: f64,
    pub prior_sd: f64,
    /// Curvature-based standard deviation used to size the grid.
    pub grid_sd: f64,
    pub grid: Vec<f64>,
    pub log_posterior: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    pub evaluations: usize,
    pub starts: usize,
    /// Objective gradient at `θ̂` (analytic for normal, central differences otherwise).
    pub gradient: Vec<f64>,
    /// Bernoulli fit looked separated; probabilities are then plug-in `sigmoid(mode)`
    /// because the Gaussian approximation of the latent posterior is unreliable.
    pub separation: bool,
    pub warnings: Vec<String>,
}

/// Everything about a fit that is serialized and plotted.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub spec: ModelSpec,
    pub theta_names: Vec<String>,
    pub theta_hat: Vec<f64>,
    pub theta_prior: Vec<(f64, f64)>,
    pub fixed_names: Vec<String>,
    pub beta: Vec<Estimate>,
    /// Prior `(mean, sd)` of each fixed effect.
    pub fixed_prior: Vec<(f64, f64)>,
    pub u: Vec<Estimate>,
    pub linear_predictor: Vec<Estimate>,
    pub fitted: Vec<Estimate>,
    pub log_marginal: f64,
    pub hyper_slices: Vec<HyperSlice>,
    pub spde: Option<SpdeSummaries>,
    pub noise_sd: Option<f64>,
    pub diagnostics: FitDiagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub summary: FitSummary,
    pub posterior: LatentPosterior,
}

/// Normal-family empirical-Bayes fit.
pub fn fit(
    assembly: &Assembly,
    fem: Option<&FemMatrices>,
    spec: &ModelSpec,
    config: &FitConfig,
) -> Result<FitResult, ModelError> {
    if spec.family != Family::Normal {
        return Err(ModelError::WrongFamily { expected: Family::Normal, got: spec.family });
    }
    run(assembly, fem, spec, config)
}

/// Bernoulli (logit link) fit with a Laplace-approximated marginal likelihood.
pub fn fit_bernoulli(
    assembly: &Assembly,
    fem: Option<&FemMatrices>,
    spec: &ModelSpec,
    config: &FitConfig,
) -> Result<FitResult, ModelError> {
    if spec.family != Family::Bernoulli {
        return Err(ModelError::WrongFamily { expected: Family::Bernoulli, got: spec.family });
    }
    run(assembly, fem, spec, config)
}

/// Dispatches on `spec.family`.
pub fn fit_model(
    assembly: &Assembly,
    fem: Option<&FemMatrices>,
    spec: &ModelSpec,
    config: &FitConfig,
) -> Result<FitResult, ModelError> {
    run(assembly, fem, spec, config)
}

fn run(
    assembly: &Assembly,
    fem: Option<&FemMatrices>,
    spec: &ModelSpec,
    config: &FitConfig,
) -> Result<FitResult, ModelError> {
    let model = LatentModel::new(assembly, fem, spec.family, &config.priors)?;
    let objective = |t: &[f64]| model.log_posterior(t).map_or(f64::INFINITY, |v| -v);

    let starts: Vec<Vec<f64>> = match &config.warm_start {
        Some(t) => {
            if t.len() != model.n_theta() {
                return Err(ModelError::ThetaLength { expected: model.n_theta(), got: t.len() });
            }
            alloc::vec![t.clone()]
        }
        None => {
            let mean = model.prior_mean_theta();
            let dispersed = mean.iter().enumerate().map(|(i, m)| if i % 2 == 0 { m + 1.5 } else { m - 1.5 }).collect();
            alloc::vec![mean, dispersed]
        }
    };
    let mut evaluations = 0;
    let mut best: Option<Minimum> = None;
    let mut best_any: Option<Minimum> = None;
    for start in &starts {
        let m = nelder_mead(objective, start, &config.optimizer);
        evaluations += m.evaluations;
        if best_any.as_ref().map_or(true, |b| m.value < b.value) {
            best_any = Some(m.clone());
        }
        if m.converged && m.value.is_finite() && best.as_ref().map_or(true, |b| m.value < b.value) {
            best = Some(m);
        }
    }
    let Some(best) = best else {
        let b = best_any.unwrap();
        return Err(ModelError::NotConverged { evaluations, best_theta: b.x, best_value: -b.value });
    };
    let theta = best.x;

    let (posterior, log_marginal) = model.posterior_with_value(&theta)?;
    let gradient = match spec.family {
        Family::Normal => model.log_posterior_gradient(&theta)?.1,
        Family::Bernoulli => central_gradient(&model, &theta),
    };
    let hyper_slices = if config.slice_points > 0 {
        slices(&model, &theta, log_marginal, config)
    } else {
        Vec::new()
    };

    let layout = assembly.layout();
    let variances = posterior.marginal_variances();
    let estimate = |i: usize| Estimate { mean: posterior.mean()[i], sd: variances[i].sqrt() };
    let u: Vec<Estimate> = layout.spatial.clone().map(estimate).collect();
    let beta: Vec<Estimate> = layout.fixed.clone().map(estimate).collect();
    let design = assembly.design();
    let linear_predictor: Vec<Estimate> = (0..design.nrows())
        .map(|i| {
            let (cols, vals) = design.row(i);
            let row: Vec<(usize, f64)> = cols.iter().copied().zip(vals.iter().copied()).collect();
            let (mean, var) = posterior.linear_combination(&row);
            Estimate { mean, sd: var.max(0.0).sqrt() }
        })
        .collect();

    let mut warnings = Vec::new();
    let mut separation = false;
    let fitted = match spec.family {
        Family::Normal => linear_predictor.clone(),
        Family::Bernoulli => {
            let max_mode = posterior.mean().iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let y = assembly.response();
            let all_fitted = linear_predictor.iter().zip(y).all(|(e, y)| (sigmoid(e.mean) - y).abs() < 1e-3);
            separation = max_mode > SEPARATION_LIMIT || all_fitted;
            if separation {
                warnings.push(format!(
                    "possible complete separation (max |latent mode| = {max_mode:.3}); fitted probabilities are plug-in"
                ));
            }
            linear_predictor.iter().map(|e| response_scale(e.mean, e.sd, separation)).collect()
        }
    };

    let fixed_prior = (0..beta.len())
        .map(|k| {
            let mean = config.priors.fixed_mean.get(k).copied().unwrap_or(0.0);
            (mean, 1.0 / config.priors.fixed_precision.sqrt())
        })
        .collect();
    let spde = model.is_spatial().then(|| spde_summaries(&SpdeParams::new(theta[1], theta[0])));
    let noise_sd = posterior.noise_precision().map(|p| 1.0 / p.sqrt());
    let summary = FitSummary {
        spec: spec.clone(),
        theta_names: model.theta_names(),
        theta_prior: model.theta_priors(),
        theta_hat: theta,
        fixed_names: assembly.fixed_names().to_vec(),
        beta,
        fixed_prior,
        u,
        linear_predictor,
        fitted,
        log_marginal,
        hyper_slices,
        spde,
        noise_sd,
        diagnostics: FitDiagnostics { evaluations, starts: starts.len(), gradient, separation, warnings },
    };
    Ok(FitResult { summary, posterior })
}

/// Logit-normal mean (plug-in under separation) and delta-method sd on the
/// probability scale.
pub(crate) fn response_scale(mean: f64, sd: f64, plug_in: bool) -> Estimate {
    let p = if plug_in { sigmoid(mean) } else { logit_normal_mean(mean, sd) };
    Estimate { mean: p, sd: p * (1.0 - p) * sd }
}

fn central_gradient(model: &LatentModel, theta: &[f64]) -> Vec<f64> {
    let h = 1e-5;
    (0..theta.len())
        .map(|i| {
            let mut t = theta.to_vec();
            t[i] = theta[i] + h;
            let up = model.log_posterior(&t).unwrap_or(f64::NAN);
            t[i] = theta[i] - h;
            let down = model.log_posterior(&t).unwrap_or(f64::NAN);
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn slices(model: &LatentModel, theta: &[f64], at_mode: f64, config: &FitConfig) -> Vec<HyperSlice> {
    let names = model.theta_names();
    let priors = model.theta_priors();
    let points = config.slice_points.max(3) | 1;
    let half = (points / 2) as f64;
    let eval_at = |i: usize, v: f64| {
        let mut t = theta.to_vec();
        t[i] = v;
        model.log_posterior(&t).unwrap_or(f64::NEG_INFINITY)
    };
    (0..theta.len())
        .map(|i| {
            let h = 1e-2;
            let curvature = (eval_at(i, theta[i] + h) - 2.0 * at_mode + eval_at(i, theta[i] - h)) / (h * h);
            let grid_sd = if curvature < 0.0 && curvature.is_finite() { 1.0 / (-curvature).sqrt() } else { 1.0 };
            let grid: Vec<f64> = (0..points)
                .map(|k| theta[i] + config.slice_width * grid_sd * (k as f64 - half) / half)
                .collect();
            let log_posterior = grid
                .iter()
                .enumerate()
                .map(|(k, &v)| if k == points / 2 { at_mode } else { eval_at(i, v) })
                .collect();
            HyperSlice {
                name: names[i].clone(),
                theta_hat: theta[i],
                prior_mean: priors[i].0,
                prior_sd: priors[i].1,
                grid_sd,
                grid,
                log_posterior,
            }
        })
        .collect()
}
