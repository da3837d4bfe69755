//! Buffered spatial leave-one-out cross-validation.
//!
//! Each run holds out one observation, drops every other observation within the
//! buffer radius, refits each model on the rest using the full-data mesh, and
//! predicts at the held-out location.

use crate::formula::ModelSpec;
use crate::mesh::{FemMatrices, Mesh, Point2};
use crate::model::{fit_dataset, predict, Dataset, FitConfig, FitResult, ModelError, PriorSettings};
use crate::stats::normal_quantile;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SlooError {
    #[error("need at least two points")]
    TooFewPoints,
    #[error("all points coincide")]
    ZeroSpread,
    #[error("radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("radius removes all data")]
    RadiusRemovesAll,
    #[error("ss must be in 1..={n}, got {ss}")]
    InvalidSampleSize { ss: usize, n: usize },
    #[error("alpha must be in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("no models")]
    NoModels,
    #[error("fewer than two successful iterations")]
    TooFewIterations,
    #[error("holdout index {0} out of bounds")]
    BadIndex(usize),
    #[error("full-data fit of model {model} failed: {source}")]
    FullFit { model: usize, source: ModelError },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Radius {
    Fixed(f64),
    /// `min(fitted range, max pairwise distance / 4)` using the first spatial model;
    /// the distance term alone when no model is spatial.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiMethod {
    Normal,
    /// Percentile bootstrap with this many resamples.
    Bootstrap { resamples: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlooConfig {
    pub ss: usize,
    pub rad: Radius,
    pub alpha: f64,
    pub seed: u64,
    pub models: Vec<ModelSpec>,
    pub ci: CiMethod,
    pub priors: PriorSettings,
}

impl SlooConfig {
    pub fn new(models: Vec<ModelSpec>, ss: usize, rad: Radius, alpha: f64, seed: u64) -> Self {
        SlooConfig { ss, rad, alpha, seed, models, ci: CiMethod::Normal, priors: PriorSettings::default() }
    }

    pub fn validate(&self, n: usize) -> Result<(), SlooError> {
        if self.ss == 0 || self.ss > n {
            return Err(SlooError::InvalidSampleSize { ss: self.ss, n });
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(SlooError::InvalidAlpha(self.alpha));
        }
        if let Radius::Fixed(r) = self.rad {
            check_radius(r)?;
        }
        if self.models.is_empty() {
            return Err(SlooError::NoModels);
        }
        Ok(())
    }
}

fn check_radius(r: f64) -> Result<(), SlooError> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(SlooError::InvalidRadius(r))
    }
}

/// Held-out prediction of one model, or the reason its fit failed.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelOutcome {
    Predicted { mean: f64, sd: f64 },
    Failed(String),
}

impl ModelOutcome {
    pub fn mean(&self) -> Option<f64> {
        match self {
            ModelOutcome::Predicted { mean, .. } => Some(*mean),
            ModelOutcome::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlooIteration {
    pub iteration: usize,
    pub holdout: usize,
    pub coord: Point2,
    pub observed: f64,
    /// Observations dropped by the buffer, not counting the holdout itself.
    pub removed: usize,
    pub outcomes: Vec<ModelOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lower <= other.upper && other.lower <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    pub mae: Interval,
    pub rmse: Interval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelMetrics {
    pub model: String,
    pub n_success: usize,
    pub n_failed: usize,
    /// `None` when fewer than two iterations succeeded.
    pub metrics: Option<ErrorMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlooResult {
    pub models: Vec<String>,
    pub radius: f64,
    pub alpha: f64,
    pub seed: u64,
    /// Full-data hyperparameter modes used as warm starts.
    pub warm_starts: Vec<Vec<f64>>,
    pub iterations: Vec<SlooIteration>,
    pub metrics: Vec<ModelMetrics>,
}

/// `min(range_estimate, max pairwise distance / 4)` by an O(n²) scan.
pub fn default_radius(range_estimate: f64, coords: &[Point2]) -> Result<f64, SlooError> {
    if coords.len() < 2 {
        return Err(SlooError::TooFewPoints);
    }
    let mut max = 0.0f64;
    for (i, a) in coords.iter().enumerate() {
        for b in &coords[i + 1..] {
            max = max.max(a.distance(b));
        }
    }
    if max == 0.0 {
        return Err(SlooError::ZeroSpread);
    }
    Ok(range_estimate.min(max / 4.0))
}

/// Indices farther than `rad` (strictly) from the holdout.
pub fn buffer_partition(coords: &[Point2], holdout: usize, rad: f64) -> Result<Vec<usize>, SlooError> {
    check_radius(rad)?;
    let centre = coords.get(holdout).ok_or(SlooError::BadIndex(holdout))?;
    let train: Vec<usize> =
        (0..coords.len()).filter(|&j| j != holdout && coords[j].distance(centre) > rad).collect();
    if train.is_empty() {
        return Err(SlooError::RadiusRemovesAll);
    }
    Ok(train)
}

/// `ss` distinct indices from `0..n`, in sampled order.
pub fn sample_holdouts(n: usize, ss: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample(&mut rng, n, ss).into_vec()
}

fn population_mean_sd(values: &[f64]) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / k;
    let mut dev: Vec<f64> = sorted.iter().map(|v| (v - mean) * (v - mean)).collect();
    dev.sort_by(f64::total_cmp);
    (mean, (dev.iter().sum::<f64>() / k).sqrt())
}

/// MAE and RMSE with normal-approximation intervals.
///
/// The MAE interval is `mean ± z·sd(|e|)/√k`; the RMSE interval is the square root of
/// the same construction over squared errors, floored at zero. Sds are population sds
/// and sums run over sorted values so the result does not depend on input order.
pub fn score_errors(errors: &[f64], alpha: f64) -> Result<ErrorMetrics, SlooError> {
    if errors.len() < 2 {
        return Err(SlooError::TooFewIterations);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SlooError::InvalidAlpha(alpha));
    }
    let z = normal_quantile(1.0 - alpha / 2.0);
    let root_k = (errors.len() as f64).sqrt();
    let abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    let sq: Vec<f64> = errors.iter().map(|e| e * e).collect();
    let (mae, sd_abs) = population_mean_sd(&abs);
    let (mse, sd_sq) = population_mean_sd(&sq);
    let half_abs = z * sd_abs / root_k;
    let half_sq = z * sd_sq / root_k;
    Ok(ErrorMetrics {
        mae: Interval { value: mae, lower: mae - half_abs, upper: mae + half_abs },
        rmse: Interval {
            value: mse.sqrt(),
            lower: (mse - half_sq).max(0.0).sqrt(),
            upper: (mse + half_sq).sqrt(),
        },
    })
}

/// MAE and RMSE with percentile-bootstrap intervals.
pub fn bootstrap_errors(errors: &[f64], alpha: f64, resamples: usize, seed: u64) -> Result<ErrorMetrics, SlooError> {
    let point = score_errors(errors, alpha)?;
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut maes = Vec::with_capacity(resamples);
    let mut rmses = Vec::with_capacity(resamples);
    let mut draw = Vec::with_capacity(k);
    for _ in 0..resamples.max(1) {
        draw.clear();
        draw.extend((0..k).map(|_| sorted[rng.random_range(0..k)]));
        draw.sort_by(f64::total_cmp);
        maes.push(draw.iter().map(|e| e.abs()).sum::<f64>() / k as f64);
        rmses.push((draw.iter().map(|e| e * e).sum::<f64>() / k as f64).sqrt());
    }
    let percentile = |v: &mut Vec<f64>, q: f64| {
        v.sort_by(f64::total_cmp);
        let pos = q * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    let (a, b) = (alpha / 2.0, 1.0 - alpha / 2.0);
    Ok(ErrorMetrics {
        mae: Interval { value: point.mae.value, lower: percentile(&mut maes, a), upper: percentile(&mut maes, b) },
        rmse: Interval { value: point.rmse.value, lower: percentile(&mut rmses, a), upper: percentile(&mut rmses, b) },
    })
}

/// Per-model metrics over the successful iterations of each model.
pub fn score_metrics(
    iterations: &[SlooIteration],
    models: &[String],
    alpha: f64,
    ci: CiMethod,
    seed: u64,
) -> Vec<ModelMetrics> {
    models
        .iter()
        .enumerate()
        .map(|(m, name)| {
            let errors: Vec<f64> =
                iterations.iter().filter_map(|it| it.outcomes[m].mean().map(|p| it.observed - p)).collect();
            let n_failed = iterations.len() - errors.len();
            let metrics = match ci {
                CiMethod::Normal => score_errors(&errors, alpha),
                CiMethod::Bootstrap { resamples } => {
                    bootstrap_errors(&errors, alpha, resamples, seed.wrapping_add(m as u64))
                }
            }
            .ok();
            ModelMetrics { model: name.clone(), n_success: errors.len(), n_failed, metrics }
        })
        .collect()
}

/// Resolved SLOO run: full-data warm starts, radius and holdouts. Iterations are
/// independent and can be evaluated in any order or concurrently.
#[derive(Debug, Clone)]
pub struct SlooPlan<'a> {
    dataset: &'a Dataset,
    mesh: &'a Mesh,
    fem: &'a FemMatrices,
    config: SlooConfig,
    radius: f64,
    holdouts: Vec<usize>,
    warm_starts: Vec<Vec<f64>>,
}

impl<'a> SlooPlan<'a> {
    /// Fits every model on the full data and resolves the radius.
    pub fn new(dataset: &'a Dataset, mesh: &'a Mesh, fem: &'a FemMatrices, config: &SlooConfig) -> Result<Self, SlooError> {
        config.validate(dataset.n())?;
        let mut full_fits = Vec::with_capacity(config.models.len());
        for (model, spec) in config.models.iter().enumerate() {
            let mut fc = FitConfig::new(config.priors.priors_for(dataset.coords(), dataset.response(), spec.family));
            fc.slice_points = 0;
            let fit = fit_dataset(dataset, Some(mesh), Some(fem), spec, &fc)
                .map_err(|source| SlooError::FullFit { model, source })?;
            full_fits.push(fit);
        }
        Self::with_fits(dataset, mesh, fem, config, &full_fits)
    }

    /// Uses existing full-data fits (one per model, in order) for warm starts and the radius.
    pub fn with_fits(
        dataset: &'a Dataset,
        mesh: &'a Mesh,
        fem: &'a FemMatrices,
        config: &SlooConfig,
        full_fits: &[FitResult],
    ) -> Result<Self, SlooError> {
        config.validate(dataset.n())?;
        let radius = match config.rad {
            Radius::Fixed(r) => r,
            Radius::Auto => {
                let range = full_fits.iter().find_map(|f| f.summary.spde.map(|s| s.range)).unwrap_or(f64::INFINITY);
                default_radius(range, dataset.coords())?
            }
        };
        check_radius(radius)?;
        Ok(SlooPlan {
            dataset,
            mesh,
            fem,
            config: config.clone(),
            radius,
            holdouts: sample_holdouts(dataset.n(), config.ss, config.seed),
            warm_starts: full_fits.iter().map(|f| f.summary.theta_hat.clone()).collect(),
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn holdouts(&self) -> &[usize] {
        &self.holdouts
    }

    pub fn len(&self) -> usize {
        self.holdouts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.holdouts.is_empty()
    }

    pub fn model_names(&self) -> Vec<String> {
        self.config.models.iter().map(|m| m.to_string()).collect()
    }

    /// Runs iteration `k` (0-based).
    pub fn run_iteration(&self, k: usize) -> SlooIteration {
        let holdout = self.holdouts[k];
        let coords = self.dataset.coords();
        let observed = self.dataset.response()[holdout];
        let train = match buffer_partition(coords, holdout, self.radius) {
            Ok(t) => t,
            Err(e) => {
                let outcomes = self.config.models.iter().map(|_| ModelOutcome::Failed(e.to_string())).collect();
                return SlooIteration {
                    iteration: k,
                    holdout,
                    coord: coords[holdout],
                    observed,
                    removed: coords.len() - 1,
                    outcomes,
                };
            }
        };
        let training = self.dataset.subset(&train);
        let target: Vec<(String, Vec<f64>)> =
            self.dataset.covariates().iter().map(|(n, c)| (n.clone(), alloc::vec![c[holdout]])).collect();
        let outcomes = self
            .config
            .models
            .iter()
            .enumerate()
            .map(|(m, spec)| {
                let mut fc = FitConfig::new(self.config.priors.priors_for(training.coords(), training.response(), spec.family));
                fc.slice_points = 0;
                fc.warm_start = self.warm_starts.get(m).cloned();
                let fitted = fit_dataset(&training, Some(self.mesh), Some(self.fem), spec, &fc).or_else(|_| {
                    fc.warm_start = None;
                    fit_dataset(&training, Some(self.mesh), Some(self.fem), spec, &fc)
                });
                match fitted.and_then(|f| predict(&f, Some(self.mesh), &[coords[holdout]], &target)) {
                    Ok(p) => ModelOutcome::Predicted { mean: p[0].mean, sd: p[0].sd },
                    Err(e) => ModelOutcome::Failed(e.to_string()),
                }
            })
            .collect();
        SlooIteration {
            iteration: k,
            holdout,
            coord: coords[holdout],
            observed,
            removed: coords.len() - 1 - train.len(),
            outcomes,
        }
    }

    /// Orders iterations by index and scores them.
    pub fn finish(&self, mut iterations: Vec<SlooIteration>) -> SlooResult {
        iterations.sort_by_key(|it| it.iteration);
        let models = self.model_names();
        let metrics = score_metrics(&iterations, &models, self.config.alpha, self.config.ci, self.config.seed);
        SlooResult {
            models,
            radius: self.radius,
            alpha: self.config.alpha,
            seed: self.config.seed,
            warm_starts: self.warm_starts.clone(),
            iterations,
            metrics,
        }
    }
}

/// Sequential SLOO run.
pub fn run_sloo(dataset: &Dataset, mesh: &Mesh, fem: &FemMatrices, config: &SlooConfig) -> Result<SlooResult, SlooError> {
    let plan = SlooPlan::new(dataset, mesh, fem, config)?;
    let iterations = (0..plan.len()).map(|k| plan.run_iteration(k)).collect();
    Ok(plan.finish(iterations))
}
