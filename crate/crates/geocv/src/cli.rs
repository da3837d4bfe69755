//! `geocv` subcommands: mesh, fit, sloo, report, synth.
//!
//! Exit status is 0 on success, 1 on a usage error and 2 when the run fails.

use crate::io::{
    load_dataset, load_polygon, read_calibration, read_fit, read_mesh, read_sloo, synth_dataset, write_calibration,
    write_dataset_csv, write_fit, write_mesh, write_sloo, Domain, IoError, LoadedData, Polygon, RadiusSetting,
    RunConfig, SynthSpec,
};
use crate::parallel::{default_threads, in_pool, run_plan};
use crate::viz::{plot_field, plot_mesh, plot_model_summaries, plot_residuals, plot_sloo, PlotBundle, Theme, VizError};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use geocv_core::diagnostics::{calibration_report, DiagnosticsError, PitVariant};
use geocv_core::field::{project_values, FieldError};
use geocv_core::formula::Family;
use geocv_core::mesh::{build_mesh, fem_matrices, Mesh, MeshError};
use geocv_core::model::{fit_dataset, FitConfig, FitSummary, ModelError};
use geocv_core::sloocv::{SlooError, SlooPlan};
use geocv_core::spde::SpdeParams;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "geocv", version, about = "SPDE spatial regression with buffered leave-one-out cross-validation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the mesh and plot it with the observations.
    Mesh(Common),
    /// Fit every model; write fits, calibration reports and summary plots.
    Fit(FitArgs),
    /// Run spatial leave-one-out cross-validation.
    Sloo(SlooArgs),
    /// Regenerate plots from the files written by earlier runs.
    Report(ReportArgs),
    /// Write a synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, env = "GEOCV_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated panel groups: fixed, hyper, random, predictor.
    #[arg(long, value_delimiter = ',')]
    pub which: Vec<String>,
    /// PIT variant: plug-in or loo.
    #[arg(long)]
    pub pit: Option<String>,
}

#[derive(Debug, Args)]
pub struct SlooArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub ss: Option<usize>,
    /// Buffer radius or `auto`.
    #[arg(long)]
    pub rad: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',')]
    pub which: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output CSV; the manifest goes next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Field range; 0 disables the field.
    #[arg(long, default_value_t = 0.3)]
    pub range: f64,
    /// Field marginal sd.
    #[arg(long, default_value_t = 1.0)]
    pub sd: f64,
    #[arg(long, default_value_t = 0.5)]
    pub noise_sd: f64,
    /// Intercept then covariate effects.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "1")]
    pub beta: Vec<f64>,
    /// `xmin,xmax,ymin,ymax`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1, default_value = "0,1,0,1")]
    pub domain: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Viz(#[from] VizError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("model {model}: {source}")]
    Fit { model: usize, source: ModelError },
    #[error(transparent)]
    Sloo(#[from] SlooError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("model {model}: {source}")]
    Diagnostics { model: usize, source: DiagnosticsError },
    #[error("{0}")]
    Invalid(String),
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Mesh(c) => mesh_cmd(c),
        Command::Fit(a) => fit_cmd(a),
        Command::Sloo(a) => sloo_cmd(a),
        Command::Report(a) => report_cmd(a),
        Command::Synth(a) => synth_cmd(a),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|source| IoError::File { path: path.into(), source })?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Serialize)]
struct Manifest {
    command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    input_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    polygon_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    overrides: Vec<String>,
    /// Output file name to its sha256.
    outputs: BTreeMap<String, String>,
}

/// Loaded config, data and output directory for one run.
struct Context {
    config: RunConfig,
    config_sha: String,
    data: LoadedData,
    polygon: Option<Polygon>,
    out: PathBuf,
    theme: Theme,
}

impl Context {
    fn load(common: &Common) -> Result<Context, CliError> {
        let mut config = RunConfig::load(&common.config)?;
        if let Some(out) = &common.out {
            config.output.dir = out.clone();
        }
        let options = config.data_options().map_err(CliError::Invalid)?;
        let data = load_dataset(&config.data.path, &options)?;
        if !data.replaced_na.is_empty() {
            eprintln!("note: {} missing covariate cells set to 0", data.replaced_na.len());
        }
        let polygon = match &config.data.polygon {
            Some(p) => Some(load_polygon(p, data.scaling.as_ref())?),
            None => None,
        };
        let out = config.output.dir.clone();
        std::fs::create_dir_all(&out).map_err(|source| IoError::File { path: out.clone(), source })?;
        let config_sha = hash_file(&common.config)?;
        let theme = Theme { binwidth: config.report.binwidth, ..Theme::default() };
        Ok(Context { config, config_sha, data, polygon, out, theme })
    }

    fn mesh(&self) -> Result<Mesh, CliError> {
        eprintln!("building mesh");
        Ok(build_mesh(self.data.dataset.coords(), &self.config.mesh_config())?)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn manifest(&self, command: &str, seed: Option<u64>, overrides: Vec<String>, outputs: &[PathBuf]) -> Result<(), CliError> {
        let polygon_sha256 = match &self.config.data.polygon {
            Some(p) => Some(hash_file(p)?),
            None => None,
        };
        let manifest = Manifest {
            command: command.into(),
            config_sha256: Some(self.config_sha.clone()),
            input_sha256: Some(hash_file(&self.config.data.path)?),
            polygon_sha256,
            seed,
            overrides,
            outputs: hash_outputs(outputs)?,
        };
        write_manifest(&self.path(&format!("manifest_{command}.toml")), &manifest)
    }

    fn rings(&self) -> Option<&[Vec<geocv_core::mesh::Point2>]> {
        self.polygon.as_ref().map(|p| p.rings.as_slice())
    }
}

fn hash_outputs(outputs: &[PathBuf]) -> Result<BTreeMap<String, String>, CliError> {
    outputs
        .iter()
        .map(|p| {
            let name = p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
            Ok((name, hash_file(p)?))
        })
        .collect()
}

fn write_manifest(path: &Path, manifest: &Manifest) -> Result<(), CliError> {
    let text = toml::to_string(manifest).map_err(|e| CliError::Invalid(e.to_string()))?;
    std::fs::write(path, text).map_err(|source| IoError::File { path: path.into(), source })?;
    Ok(())
}

fn mesh_cmd(c: &Common) -> Result<(), CliError> {
    let ctx = Context::load(c)?;
    let mesh = ctx.mesh()?;
    eprintln!("mesh: {} vertices, {} triangles", mesh.n_vertices(), mesh.n_triangles());
    let mut outputs = vec![ctx.path("mesh.csv")];
    write_mesh(&outputs[0], &mesh)?;
    outputs.extend(plot_mesh(&mesh, ctx.data.dataset.coords(), "mesh", &ctx.theme)?.write(&ctx.out)?);
    ctx.manifest("mesh", None, Vec::new(), &outputs)
}

/// Summary, residual and (for spatial fits) field plots of one fit.
fn fit_plots(
    ctx: &Context,
    k: usize,
    fit: &FitSummary,
    mesh: Option<&Mesh>,
    calibration: Option<&geocv_core::diagnostics::CalibrationReport>,
    which: &[String],
) -> Result<Vec<PlotBundle>, CliError> {
    let prefix = format!("model{k}");
    let which: Vec<&str> = which.iter().map(String::as_str).collect();
    let mut bundles = vec![plot_model_summaries(fit, &which, &prefix, &ctx.theme)?];
    if let Some(report) = calibration {
        bundles.push(plot_residuals(report, ctx.config.report.binwidth, &prefix, &ctx.theme)?);
    }
    if let (true, Some(mesh)) = (fit.spec.spatial, mesh) {
        let [nx, ny] = ctx.config.report.grid;
        let u: Vec<f64> = fit.u.iter().map(|e| e.mean).collect();
        let raster = project_values(&u, mesh, nx, ny)?;
        bundles.push(plot_field(&raster, ctx.rings(), Some(mesh), ctx.data.dataset.coords(), &prefix, &ctx.theme)?);
    }
    Ok(bundles)
}

fn fit_cmd(a: &FitArgs) -> Result<(), CliError> {
    let mut ctx = Context::load(&a.common)?;
    let mut overrides = Vec::new();
    if let Some(pit) = &a.pit {
        pit.parse::<PitVariant>().map_err(|_| CliError::Invalid(format!("unknown PIT variant `{pit}`")))?;
        ctx.config.report.pit = pit.clone();
        overrides.push(format!("pit={pit}"));
    }
    let variant: PitVariant = ctx.config.report.pit.parse().unwrap_or_default();
    let models = ctx.config.models().map_err(CliError::Invalid)?;
    let mesh = if models.iter().any(|m| m.spatial) { Some(ctx.mesh()?) } else { None };
    let fem = mesh.as_ref().map(fem_matrices);
    let settings = ctx.config.prior_settings();
    let dataset = &ctx.data.dataset;
    let mut outputs = Vec::new();
    if let Some(mesh) = &mesh {
        outputs.push(ctx.path("mesh.csv"));
        write_mesh(outputs.last().unwrap(), mesh)?;
    }
    let threads = a.common.threads.filter(|&t| t > 0).unwrap_or_else(default_threads);
    for (i, spec) in models.iter().enumerate() {
        eprintln!("fitting model {}: {spec}", i + 1);
    }
    let fits = in_pool(threads, || {
        models
            .par_iter()
            .map(|spec| {
                let config = FitConfig::new(settings.priors_for(dataset.coords(), dataset.response(), spec.family));
                fit_dataset(dataset, mesh.as_ref(), fem.as_ref(), spec, &config)
            })
            .collect::<Vec<_>>()
    });
    for (i, (spec, fit)) in models.iter().zip(fits).enumerate() {
        let k = i + 1;
        let fit = fit.map_err(|source| CliError::Fit { model: k, source })?;
        for w in &fit.summary.diagnostics.warnings {
            eprintln!("model {k}: warning: {w}");
        }
        outputs.push(ctx.path(&format!("fit_{k}.csv")));
        write_fit(outputs.last().unwrap(), &fit.summary)?;
        let calibration = if spec.family == Family::Normal {
            let report = calibration_report(&fit, dataset.response(), variant)
                .map_err(|source| CliError::Diagnostics { model: k, source })?;
            eprintln!("model {k}: PIT KS statistic {:.4}", report.ks_statistic);
            outputs.push(ctx.path(&format!("calibration_{k}.csv")));
            write_calibration(outputs.last().unwrap(), &report)?;
            Some(report)
        } else {
            None
        };
        for b in fit_plots(&ctx, k, &fit.summary, mesh.as_ref(), calibration.as_ref(), &a.which)? {
            outputs.extend(b.write(&ctx.out)?);
        }
    }
    ctx.manifest("fit", None, overrides, &outputs)
}

fn sloo_cmd(a: &SlooArgs) -> Result<(), CliError> {
    let mut ctx = Context::load(&a.common)?;
    let mut overrides = Vec::new();
    let Some(s) = ctx.config.sloo.as_mut() else {
        return Err(CliError::Invalid("config has no [sloo] section".into()));
    };
    if let Some(ss) = a.ss {
        s.ss = ss;
        overrides.push(format!("ss={ss}"));
    }
    if let Some(rad) = &a.rad {
        s.rad = match rad.as_str() {
            "auto" => RadiusSetting::Named("auto".into()),
            r => RadiusSetting::Value(r.parse().map_err(|_| CliError::Invalid(format!("invalid radius `{r}`")))?),
        };
        overrides.push(format!("rad={rad}"));
    }
    if let Some(alpha) = a.alpha {
        s.alpha = alpha;
        overrides.push(format!("alpha={alpha}"));
    }
    if let Some(seed) = a.seed {
        s.seed = seed;
        overrides.push(format!("seed={seed}"));
    }
    let config = ctx.config.sloo_config().map_err(CliError::Invalid)?;
    let threads = a.common.threads.filter(|&t| t > 0).unwrap_or_else(default_threads);
    let mesh = ctx.mesh()?;
    let fem = fem_matrices(&mesh);
    eprintln!("full-data fits for {} models", config.models.len());
    let plan = SlooPlan::new(&ctx.data.dataset, &mesh, &fem, &config)?;
    eprintln!("{} iterations, radius {:.6}, {} threads", plan.len(), plan.radius(), threads);
    let result = run_plan(&plan, threads);
    for m in &result.metrics {
        match &m.metrics {
            Some(e) => eprintln!("{}: MAE {:.4}, RMSE {:.4}", m.model, e.mae.value, e.rmse.value),
            None => eprintln!("{}: too few successful iterations", m.model),
        }
    }
    let mut outputs = vec![ctx.path("sloo_result.csv")];
    write_sloo(&outputs[0], &result)?;
    outputs.extend(plot_sloo(&result, ctx.data.dataset.coords(), result.radius, "sloo", &ctx.theme)?.write(&ctx.out)?);
    ctx.manifest("sloo", Some(config.seed), overrides, &outputs)
}

fn report_cmd(a: &ReportArgs) -> Result<(), CliError> {
    let ctx = Context::load(&a.common)?;
    let mesh_path = ctx.path("mesh.csv");
    let mesh = if mesh_path.exists() { Some(read_mesh(&mesh_path)?) } else { None };
    let mut outputs = Vec::new();
    if let Some(mesh) = &mesh {
        outputs.extend(plot_mesh(mesh, ctx.data.dataset.coords(), "mesh", &ctx.theme)?.write(&ctx.out)?);
    }
    let mut k = 1;
    while ctx.path(&format!("fit_{k}.csv")).exists() {
        eprintln!("report for model {k}");
        let fit = read_fit(&ctx.path(&format!("fit_{k}.csv")))?;
        let cal_path = ctx.path(&format!("calibration_{k}.csv"));
        let calibration = if cal_path.exists() { Some(read_calibration(&cal_path)?) } else { None };
        for b in fit_plots(&ctx, k, &fit, mesh.as_ref(), calibration.as_ref(), &a.which)? {
            outputs.extend(b.write(&ctx.out)?);
        }
        k += 1;
    }
    let sloo_path = ctx.path("sloo_result.csv");
    let mut seed = None;
    if sloo_path.exists() {
        let result = read_sloo(&sloo_path)?;
        seed = Some(result.seed);
        outputs.extend(plot_sloo(&result, ctx.data.dataset.coords(), result.radius, "sloo", &ctx.theme)?.write(&ctx.out)?);
    }
    if outputs.is_empty() {
        return Err(CliError::Invalid(format!("no results found in {}", ctx.out.display())));
    }
    ctx.manifest("report", seed, Vec::new(), &outputs)
}

fn synth_cmd(a: &SynthArgs) -> Result<(), CliError> {
    let [xmin, xmax, ymin, ymax] = a.domain[..] else {
        return Err(CliError::Invalid("--domain needs four values: xmin,xmax,ymin,ymax".into()));
    };
    let spde = (a.range > 0.0).then(|| SpdeParams::from_range_sd(a.range, a.sd));
    let spec = SynthSpec {
        seed: a.seed,
        n: a.n,
        spde,
        beta: a.beta.clone(),
        noise_sd: a.noise_sd,
        domain: Domain { xmin, xmax, ymin, ymax },
    };
    eprintln!("simulating {} points", a.n);
    let (dataset, _) = synth_dataset(&spec)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| IoError::File { path: dir.into(), source })?;
    }
    write_dataset_csv(&a.out, &dataset)?;
    let manifest = Manifest {
        command: "synth".into(),
        config_sha256: None,
        input_sha256: None,
        polygon_sha256: None,
        seed: Some(a.seed),
        overrides: vec![
            format!("n={}", a.n),
            format!("range={}", a.range),
            format!("sd={}", a.sd),
            format!("noise_sd={}", a.noise_sd),
            format!("beta={:?}", a.beta),
            format!("domain={:?}", a.domain),
        ],
        outputs: hash_outputs(std::slice::from_ref(&a.out))?,
    };
    let dir = a.out.parent().unwrap_or(Path::new(""));
    write_manifest(&dir.join("manifest_synth.toml"), &manifest)
}
