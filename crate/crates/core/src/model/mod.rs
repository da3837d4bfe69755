//! Latent Gaussian regression with an optional SPDE spatial field.
//!
//! The latent vector is `x = [u; β]` (mesh-vertex field values, then fixed effects)
//! and the linear predictor is `η = M x` with `M = [A | X]`. Hyperparameters are
//! fitted by empirical Bayes: the normal family integrates `x` out exactly, the
//! Bernoulli family uses a Laplace approximation.

mod fit;
mod latent;
mod predict;

use crate::formula::{Family, ModelSpec};
use crate::linalg::{CsrMatrix, LinalgError};
use crate::mesh::geometry::{convex_hull, max_pairwise_distance};
use crate::mesh::{make_projector, FemMatrices, Mesh, Point2, Projector};
use crate::spde::{SpdeError, SpdePrior};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Range;
use thiserror::Error;

pub use fit::{
    fit, fit_bernoulli, fit_model, Estimate, FitConfig, FitDiagnostics, FitResult, FitSummary, HyperSlice,
};
pub use latent::{log_marginal_gaussian, LatentModel, LatentPosterior};
pub use predict::{predict, Prediction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("column `{column}` has {got} values, expected {expected}")]
    LengthMismatch { column: String, expected: usize, got: usize },
    #[error("non-finite value in column `{column}` at row {row}")]
    NonFinite { column: String, row: usize },
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("covariate `{0}` not found")]
    MissingCovariate(String),
    #[error("observation {0} lies outside the mesh")]
    OutsideMesh(usize),
    #[error("prediction location {0} lies outside the mesh")]
    PredictionOutsideMesh(usize),
    #[error("projector has {got} rows for {expected} observations")]
    ProjectorMismatch { expected: usize, got: usize },
    #[error("a spatial model needs a mesh, projector and FEM matrices")]
    MissingSpatialInputs,
    #[error("response at row {0} is not 0 or 1")]
    NonBinaryResponse(usize),
    #[error("{got} model passed to the {expected} fitter")]
    WrongFamily { expected: Family, got: Family },
    #[error("hyperparameter vector has length {got}, expected {expected}")]
    ThetaLength { expected: usize, got: usize },
    #[error("factorization failed at theta = {theta:?}: {source}")]
    Factorization { theta: Vec<f64>, source: LinalgError },
    #[error(transparent)]
    Spde(#[from] SpdeError),
    #[error("Newton iterations failed at theta = {theta:?} (gradient max-norm {gradient_norm:e})")]
    NewtonDiverged { theta: Vec<f64>, gradient_norm: f64 },
    #[error(
        "optimizer did not converge after {evaluations} evaluations; best theta = {best_theta:?}, log posterior {best_value}"
    )]
    NotConverged { evaluations: usize, best_theta: Vec<f64>, best_value: f64 },
    #[error("invalid prior: {0}")]
    InvalidPrior(&'static str),
}

/// Point observations with named covariate columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    coords: Vec<Point2>,
    response: Vec<f64>,
    covariates: Vec<(String, Vec<f64>)>,
}

impl Dataset {
    pub fn new(
        coords: Vec<Point2>,
        response: Vec<f64>,
        covariates: Vec<(String, Vec<f64>)>,
    ) -> Result<Self, ModelError> {
        let n = coords.len();
        if n == 0 {
            return Err(ModelError::EmptyDataset);
        }
        if let Some(row) = coords.iter().position(|p| !p.is_finite()) {
            return Err(ModelError::NonFinite { column: "coordinates".to_string(), row });
        }
        let check = |name: &str, col: &[f64]| {
            if col.len() != n {
                return Err(ModelError::LengthMismatch { column: name.to_string(), expected: n, got: col.len() });
            }
            match col.iter().position(|v| !v.is_finite()) {
                Some(row) => Err(ModelError::NonFinite { column: name.to_string(), row }),
                None => Ok(()),
            }
        };
        check("response", &response)?;
        for (i, (name, col)) in covariates.iter().enumerate() {
            if covariates[..i].iter().any(|(other, _)| other == name) {
                return Err(ModelError::DuplicateColumn(name.clone()));
            }
            check(name, col)?;
        }
        Ok(Dataset { coords, response, covariates })
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Point2] {
        &self.coords
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn covariates(&self) -> &[(String, Vec<f64>)] {
        &self.covariates
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.covariates.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_slice())
    }

    /// Rows `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            coords: indices.iter().map(|&i| self.coords[i]).collect(),
            response: indices.iter().map(|&i| self.response[i]).collect(),
            covariates: self
                .covariates
                .iter()
                .map(|(n, c)| (n.clone(), indices.iter().map(|&i| c[i]).collect()))
                .collect(),
        }
    }
}

/// Index ranges of the spatial block `u` and fixed-effect block `β` in the latent vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentLayout {
    pub spatial: Range<usize>,
    pub fixed: Range<usize>,
}

impl LatentLayout {
    pub fn dim(&self) -> usize {
        self.fixed.end
    }

    pub fn is_spatial(&self) -> bool {
        !self.spatial.is_empty()
    }
}

/// Stacked design `M = [A | X]` and response.
#[derive(Debug, Clone, PartialEq)]
pub struct Assembly {
    design: CsrMatrix,
    response: Vec<f64>,
    layout: LatentLayout,
    fixed_names: Vec<String>,
}

impl Assembly {
    pub fn design(&self) -> &CsrMatrix {
        &self.design
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn layout(&self) -> &LatentLayout {
        &self.layout
    }

    pub fn fixed_names(&self) -> &[String] {
        &self.fixed_names
    }

    pub fn n_obs(&self) -> usize {
        self.response.len()
    }
}

/// Fixed-effect design rows: intercept column first, then covariates in formula order.
fn fixed_columns<'a>(
    spec: &ModelSpec,
    n: usize,
    lookup: impl Fn(&str) -> Option<&'a [f64]>,
) -> Result<Vec<Option<&'a [f64]>>, ModelError> {
    let mut cols = Vec::with_capacity(spec.n_fixed());
    if spec.intercept {
        cols.push(None);
    }
    for name in &spec.covariates {
        let col = lookup(name).ok_or_else(|| ModelError::MissingCovariate(name.clone()))?;
        if col.len() != n {
            return Err(ModelError::LengthMismatch { column: name.clone(), expected: n, got: col.len() });
        }
        cols.push(Some(col));
    }
    Ok(cols)
}

fn design_triplets(
    rows: usize,
    projector: Option<&Projector>,
    fixed: &[Option<&[f64]>],
    offset: usize,
) -> Vec<(usize, usize, f64)> {
    let mut triplets = Vec::new();
    for i in 0..rows {
        if let Some(p) = projector {
            let (cols, vals) = p.row(i);
            triplets.extend(cols.iter().zip(vals).map(|(&j, &w)| (i, j, w)));
        }
        for (k, col) in fixed.iter().enumerate() {
            let v = col.map_or(1.0, |c| c[i]);
            if v != 0.0 {
                triplets.push((i, offset + k, v));
            }
        }
    }
    triplets
}

/// Builds `M = [A | X]`. The projector is required for spatial specs and ignored
/// otherwise.
pub fn assemble(
    dataset: &Dataset,
    spec: &ModelSpec,
    projector: Option<&Projector>,
) -> Result<Assembly, ModelError> {
    let n = dataset.n();
    let projector = if spec.spatial {
        let p = projector.ok_or(ModelError::MissingSpatialInputs)?;
        if p.n_locations() != n {
            return Err(ModelError::ProjectorMismatch { expected: n, got: p.n_locations() });
        }
        if let Some(row) = p.first_outside() {
            return Err(ModelError::OutsideMesh(row));
        }
        Some(p)
    } else {
        None
    };
    let nu = projector.map_or(0, |p| p.matrix().ncols());
    let fixed = fixed_columns(spec, n, |name| dataset.column(name))?;
    let p = fixed.len();
    let triplets = design_triplets(n, projector, &fixed, nu);
    Ok(Assembly {
        design: CsrMatrix::from_triplets(n, nu + p, &triplets),
        response: dataset.response().to_vec(),
        layout: LatentLayout { spatial: 0..nu, fixed: nu..nu + p },
        fixed_names: spec.fixed_effect_names(),
    })
}

/// Projects, assembles and fits `spec` on `dataset` in one call.
///
/// `mesh` and `fem` are required for spatial specs and ignored otherwise.
pub fn fit_dataset(
    dataset: &Dataset,
    mesh: Option<&Mesh>,
    fem: Option<&FemMatrices>,
    spec: &ModelSpec,
    config: &FitConfig,
) -> Result<FitResult, ModelError> {
    let (mesh, fem) = if spec.spatial {
        (Some(mesh.ok_or(ModelError::MissingSpatialInputs)?), Some(fem.ok_or(ModelError::MissingSpatialInputs)?))
    } else {
        (None, None)
    };
    let projector = mesh.map(|m| make_projector(m, dataset.coords()));
    let assembly = assemble(dataset, spec, projector.as_ref())?;
    fit_model(&assembly, fem, spec, config)
}

/// Overrides applied on top of [`Priors::default_for`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PriorSettings {
    pub fixed_precision: Option<f64>,
    /// Prior sd on every log-scale hyperparameter.
    pub hyper_sd: Option<f64>,
}

impl PriorSettings {
    pub fn priors_for(&self, coords: &[Point2], response: &[f64], family: Family) -> Priors {
        let mut p = Priors::default_for(coords, response, family);
        if let Some(f) = self.fixed_precision {
            p.fixed_precision = f;
        }
        if let Some(sd) = self.hyper_sd {
            p.spde.sd = (sd, sd);
            p.noise_log_precision.1 = sd;
        }
        p
    }
}

/// Hyperparameter and fixed-effect priors.
#[derive(Debug, Clone, PartialEq)]
pub struct Priors {
    pub spde: SpdePrior,
    /// Gaussian `(mean, sd)` on the log noise precision.
    pub noise_log_precision: (f64, f64),
    /// Precision of the independent Gaussian priors on fixed effects.
    pub fixed_precision: f64,
    /// Prior means of the fixed effects; empty means all zero.
    pub fixed_mean: Vec<f64>,
}

impl Priors {
    /// Data-adaptive weakly informative defaults.
    ///
    /// SPDE prior range is 20% of the coordinate hull diameter; the prior marginal sd
    /// and the noise prior are centred on the response's spread (unit sd for
    /// Bernoulli); log-scale sds are 10; fixed effects get precision 1e-3.
    pub fn default_for(coords: &[Point2], response: &[f64], family: Family) -> Self {
        let hull = convex_hull(coords);
        let diameter = if hull.len() >= 2 { max_pairwise_distance(&hull) } else { 1.0 };
        let diameter = if diameter > 0.0 { diameter } else { 1.0 };
        let n = response.len() as f64;
        let mean = response.iter().sum::<f64>() / n;
        let var = response.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
        let (sd0, noise_mean) = match family {
            Family::Normal if var > 0.0 && var.is_finite() => (var.sqrt(), -var.ln()),
            _ => (1.0, 0.0),
        };
        let mut spde = SpdePrior::default_for_diameter(diameter);
        // Shift log τ so the prior marginal sd is sd0 instead of 1.
        spde.mean.0 -= sd0.ln();
        Priors { spde, noise_log_precision: (noise_mean, 10.0), fixed_precision: 1e-3, fixed_mean: Vec::new() }
    }

    fn validate(&self, n_fixed: usize) -> Result<(), ModelError> {
        if !(self.fixed_precision > 0.0) || !self.fixed_precision.is_finite() {
            return Err(ModelError::InvalidPrior("fixed-effect precision must be positive"));
        }
        if !self.fixed_mean.is_empty() && self.fixed_mean.len() != n_fixed {
            return Err(ModelError::InvalidPrior("fixed-effect prior mean has the wrong length"));
        }
        let sds = [self.spde.sd.0, self.spde.sd.1, self.noise_log_precision.1];
        if sds.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(ModelError::InvalidPrior("hyperparameter prior sd must be positive"));
        }
        if self.fixed_mean.iter().any(|m| !m.is_finite()) {
            return Err(ModelError::InvalidPrior("fixed-effect prior mean must be finite"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::mesh::{make_projector, Mesh};
    use alloc::vec;

    fn toy() -> Dataset {
        Dataset::new(
            vec![Point2::new(0.1, 0.1), Point2::new(0.5, 0.2), Point2::new(0.3, 0.6)],
            vec![1.0, 2.0, 3.0],
            vec![("a".into(), vec![1.0, 0.0, 2.0])],
        )
        .unwrap()
    }

    #[test]
    fn dataset_validation() {
        let bad = Dataset::new(vec![Point2::new(0.0, 0.0)], vec![f64::NAN], vec![]);
        assert_eq!(bad.unwrap_err(), ModelError::NonFinite { column: "response".into(), row: 0 });
        let bad = Dataset::new(vec![Point2::new(0.0, 0.0)], vec![1.0], vec![("a".into(), vec![])]);
        assert!(matches!(bad, Err(ModelError::LengthMismatch { .. })));
        assert_eq!(Dataset::new(vec![], vec![], vec![]).unwrap_err(), ModelError::EmptyDataset);
        assert_eq!(toy().subset(&[2, 0]).response(), &[3.0, 1.0]);
    }

    #[test]
    fn assemble_layouts() {
        let d = toy();
        let mesh = Mesh::new(
            vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)],
            vec![[0, 1, 2]],
            vec![true; 3],
        )
        .unwrap();
        let proj = make_projector(&mesh, d.coords());
        let spec = parse_formula("y ~ a + spatial").unwrap();
        let asm = assemble(&d, &spec, Some(&proj)).unwrap();
        assert_eq!((asm.design().nrows(), asm.design().ncols()), (3, 5));
        assert_eq!(asm.layout().fixed, 3..5);
        assert_eq!(asm.design().get(2, 4), 2.0);
        assert_eq!(asm.design().get(1, 3), 1.0);

        let spec = parse_formula("y ~ 1").unwrap();
        let asm = assemble(&d, &spec, None).unwrap();
        assert_eq!(asm.design().to_dense(), vec![1.0; 3]);
        assert!(!asm.layout().is_spatial());

        let spec = parse_formula("y ~ b").unwrap();
        assert_eq!(assemble(&d, &spec, None).unwrap_err(), ModelError::MissingCovariate("b".into()));

        let far = Dataset::new(vec![Point2::new(5.0, 5.0)], vec![0.0], vec![]).unwrap();
        let proj = make_projector(&mesh, far.coords());
        let spec = parse_formula("y ~ spatial").unwrap();
        assert_eq!(assemble(&far, &spec, Some(&proj)).unwrap_err(), ModelError::OutsideMesh(0));
    }
}
