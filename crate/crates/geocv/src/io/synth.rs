use super::{file_error, IoError};
use geocv_core::linalg::SparseCholesky;
use geocv_core::mesh::{build_mesh, fem_matrices, Mesh, MeshConfig, Point2};
use geocv_core::model::Dataset;
use geocv_core::spde::{assemble_precision, spde_summaries, SpdeParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Domain {
    pub fn unit() -> Self {
        Domain { xmin: 0.0, xmax: 1.0, ymin: 0.0, ymax: 1.0 }
    }

    fn diagonal(&self) -> f64 {
        (self.xmax - self.xmin).hypot(self.ymax - self.ymin)
    }
}

/// Synthetic data: `response = β₀ + Σ βₖ xₖ + u(s) + ε`, covariates `x1, x2, …` iid
/// standard normal, `u` an SPDE field (absent when `spde` is `None`).
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub n: usize,
    pub spde: Option<SpdeParams>,
    /// Intercept first; may be empty.
    pub beta: Vec<f64>,
    pub noise_sd: f64,
    pub domain: Domain,
}

#[derive(Debug, Clone)]
pub struct SynthTruth {
    /// Field at the data locations (zeros without a field).
    pub u: Vec<f64>,
    pub beta: Vec<f64>,
    pub spde: Option<SpdeParams>,
    pub noise_sd: f64,
    /// Simulation mesh and the field at its vertices.
    pub mesh: Option<Mesh>,
    pub field: Vec<f64>,
}

/// Simulation mesh: data points are vertices, edges are at most a quarter range
/// (bounded below by 1/60 of the domain diagonal), and the ring is wide enough to keep
/// boundary inflation away from the domain.
fn simulation_mesh(points: &[Point2], domain: &Domain, range: f64) -> Result<Mesh, IoError> {
    let diag = domain.diagonal();
    let edge = (range / 4.0).max(diag / 60.0);
    let mut seeds = points.to_vec();
    seeds.extend([
        Point2::new(domain.xmin, domain.ymin),
        Point2::new(domain.xmax, domain.ymin),
        Point2::new(domain.xmax, domain.ymax),
        Point2::new(domain.xmin, domain.ymax),
    ]);
    let config = MeshConfig::new(edge, 2.0 * edge, 0.0).with_extension(range.max(0.2 * diag));
    Ok(build_mesh(&seeds, &config)?)
}

pub fn synth_dataset(spec: &SynthSpec) -> Result<(Dataset, SynthTruth), IoError> {
    if spec.n < 3 {
        return Err(IoError::Synth(format!("need n >= 3, got {}", spec.n)));
    }
    let d = spec.domain;
    if !(d.xmax > d.xmin && d.ymax > d.ymin) {
        return Err(IoError::Synth("empty domain".into()));
    }
    if !(spec.noise_sd >= 0.0) {
        return Err(IoError::Synth("noise sd must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let points: Vec<Point2> = (0..spec.n)
        .map(|_| Point2::new(rng.random_range(d.xmin..d.xmax), rng.random_range(d.ymin..d.ymax)))
        .collect();
    let covariates: Vec<(String, Vec<f64>)> = (1..spec.beta.len().max(1))
        .map(|k| (format!("x{k}"), (0..spec.n).map(|_| rng.sample(StandardNormal)).collect()))
        .collect();

    let (mesh, field, u) = match spec.spde {
        Some(params) => {
            let mesh = simulation_mesh(&points, &d, spde_summaries(&params).range)?;
            let q = assemble_precision(&fem_matrices(&mesh), &params).map_err(|e| IoError::Synth(e.to_string()))?;
            let chol = SparseCholesky::factor(q.matrix()).map_err(|e| IoError::Synth(e.to_string()))?;
            let z: Vec<f64> = (0..mesh.n_vertices()).map(|_| rng.sample(StandardNormal)).collect();
            let field = chol.sample(&z);
            let projector = geocv_core::mesh::make_projector(&mesh, &points);
            let u = projector.apply(&field);
            (Some(mesh), field, u)
        }
        None => (None, Vec::new(), vec![0.0; spec.n]),
    };

    let response: Vec<f64> = (0..spec.n)
        .map(|i| {
            let mut eta = spec.beta.first().copied().unwrap_or(0.0) + u[i];
            for (k, (_, col)) in covariates.iter().enumerate() {
                eta += spec.beta[k + 1] * col[i];
            }
            let e: f64 = rng.sample(StandardNormal);
            eta + spec.noise_sd * e
        })
        .collect();
    let dataset = Dataset::new(points, response, covariates)?;
    let truth = SynthTruth { u, beta: spec.beta.clone(), spde: spec.spde, noise_sd: spec.noise_sd, mesh, field };
    Ok((dataset, truth))
}

/// Writes `x,y,response,<covariates>` with 17 significant digits.
pub fn write_dataset_csv(path: &Path, dataset: &Dataset) -> Result<(), IoError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|source| IoError::Csv { path: path.into(), source })?;
    let csv_err = |source| IoError::Csv { path: path.into(), source };
    let mut header = vec!["x".to_string(), "y".into(), "response".into()];
    header.extend(dataset.covariates().iter().map(|(n, _)| n.clone()));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..dataset.n() {
        let p = dataset.coords()[i];
        let mut row = vec![format!("{:.16e}", p.x), format!("{:.16e}", p.y), format!("{:.16e}", dataset.response()[i])];
        row.extend(dataset.covariates().iter().map(|(_, c)| format!("{:.16e}", c[i])));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(file_error(path))
}
