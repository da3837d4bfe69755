//! Probability-integral-transform calibration and observed-versus-predicted summaries.

use crate::formula::Family;
use crate::model::FitResult;
use crate::stats::normal_cdf;
use alloc::vec::Vec;
use core::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("PIT values are only defined for the normal family")]
    NotNormal,
    #[error("response has {got} values, fit has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("predictive sd at observation {0} is not positive")]
    NonPositiveSd(usize),
    #[error("no values")]
    Empty,
    #[error("value {0} is outside [0, 1]")]
    OutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PitVariant {
    /// Full-data posterior predictive.
    #[default]
    PlugIn,
    /// Exact leave-one-out predictive with hyperparameters held at the full-data mode.
    Loo,
}

impl PitVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            PitVariant::PlugIn => "plug-in",
            PitVariant::Loo => "loo",
        }
    }
}

impl fmt::Display for PitVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for PitVariant {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "plug-in" | "plugin" => Ok(PitVariant::PlugIn),
            "loo" => Ok(PitVariant::Loo),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObsPred {
    pub observed: f64,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub variant: PitVariant,
    pub pit: Vec<f64>,
    pub ks_statistic: f64,
    pub obs_pred: Vec<ObsPred>,
}

fn check_len(fit: &FitResult, y: &[f64]) -> Result<(), DiagnosticsError> {
    let n = fit.summary.fitted.len();
    if y.len() != n {
        return Err(DiagnosticsError::LengthMismatch { expected: n, got: y.len() });
    }
    Ok(())
}

/// Predictive mean and variance of each observation under `variant`.
fn predictive(fit: &FitResult, y: &[f64], variant: PitVariant) -> Result<Vec<(f64, f64)>, DiagnosticsError> {
    let prec = fit.posterior.noise_precision().ok_or(DiagnosticsError::NotNormal)?;
    fit.summary
        .linear_predictor
        .iter()
        .zip(y)
        .enumerate()
        .map(|(i, (e, &yi))| {
            let v = e.sd * e.sd;
            match variant {
                PitVariant::PlugIn => Ok((e.mean, v + 1.0 / prec)),
                PitVariant::Loo => {
                    // Remove observation i's Gaussian factor from the marginal of η_i.
                    let cavity_precision = 1.0 / v - prec;
                    if !(cavity_precision > 0.0) || !cavity_precision.is_finite() {
                        return Err(DiagnosticsError::NonPositiveSd(i));
                    }
                    let vc = 1.0 / cavity_precision;
                    let mc = vc * (e.mean / v - prec * yi);
                    Ok((mc, vc + 1.0 / prec))
                }
            }
        })
        .collect()
}

/// `Φ((yᵢ − μᵢ)/sᵢ)` under the posterior predictive (noise included).
pub fn pit_values(fit: &FitResult, y: &[f64], variant: PitVariant) -> Result<Vec<f64>, DiagnosticsError> {
    if fit.summary.spec.family != Family::Normal {
        return Err(DiagnosticsError::NotNormal);
    }
    check_len(fit, y)?;
    predictive(fit, y, variant)?
        .into_iter()
        .zip(y)
        .enumerate()
        .map(|(i, ((m, v), yi))| {
            let s = v.sqrt();
            if !(s > 0.0) || !s.is_finite() {
                return Err(DiagnosticsError::NonPositiveSd(i));
            }
            Ok(normal_cdf((yi - m) / s))
        })
        .collect()
}

/// Observed values against full-data predictive means and sds, in dataset order.
///
/// The sd includes observation noise for the normal family; for Bernoulli it is the
/// probability-scale sd of the fitted value.
pub fn obs_pred(fit: &FitResult, y: &[f64]) -> Result<Vec<ObsPred>, DiagnosticsError> {
    check_len(fit, y)?;
    let noise_var = fit.posterior.noise_precision().map(|p| 1.0 / p);
    Ok(fit
        .summary
        .fitted
        .iter()
        .zip(&fit.summary.linear_predictor)
        .zip(y)
        .map(|((f, lp), &observed)| match noise_var {
            Some(nv) => ObsPred { observed, mean: lp.mean, sd: (lp.sd * lp.sd + nv).sqrt() },
            None => ObsPred { observed, mean: f.mean, sd: f.sd },
        })
        .collect())
}

/// One-sample Kolmogorov–Smirnov statistic against Uniform(0, 1).
pub fn ks_uniform(values: &[f64]) -> Result<f64, DiagnosticsError> {
    if values.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    if let Some(&v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(DiagnosticsError::OutOfRange(v));
    }
    let mut u = values.to_vec();
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    Ok(u.iter().enumerate().fold(0.0f64, |d, (i, &ui)| {
        let i = i as f64;
        d.max((i + 1.0) / n - ui).max(ui - i / n)
    }))
}

pub fn calibration_report(
    fit: &FitResult,
    y: &[f64],
    variant: PitVariant,
) -> Result<CalibrationReport, DiagnosticsError> {
    let pit = pit_values(fit, y, variant)?;
    let ks_statistic = ks_uniform(&pit)?;
    Ok(CalibrationReport { variant, pit, ks_statistic, obs_pred: obs_pred(fit, y)? })
}
