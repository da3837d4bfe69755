//! Result files: a schema line, then named CSV sections.
//!
//! ```text
//! # geocv sloo-result 1
//! # section meta
//! key,value
//! ...
//! # section iterations
//! ...
//! ```
//!
//! Floats are written with 17 significant digits so reading reproduces them exactly.

use super::{file_error, IoError};
use geocv_core::diagnostics::{CalibrationReport, ObsPred, PitVariant};
use geocv_core::formula::{Family, ModelSpec};
use geocv_core::mesh::{Mesh, Point2};
use geocv_core::model::{Estimate, FitDiagnostics, FitSummary, HyperSlice};
use geocv_core::sloocv::{ErrorMetrics, Interval, ModelMetrics, ModelOutcome, SlooIteration, SlooResult};
use geocv_core::spde::SpdeSummaries;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), num)
}

struct Section {
    name: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Section {
    fn new(name: &'static str, header: &[&'static str]) -> Self {
        Section { name, header: header.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

fn meta(pairs: Vec<(&'static str, String)>) -> Section {
    let mut s = Section::new("meta", &["key", "value"]);
    for (k, v) in pairs {
        s.push(vec![k.into(), v]);
    }
    s
}

fn write_sections(path: &Path, kind: &str, sections: &[Section]) -> Result<(), IoError> {
    let mut out = format!("# geocv {kind} {SCHEMA_VERSION}\n");
    for s in sections {
        out.push_str(&format!("# section {}\n", s.name));
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let csv_err = |source| IoError::Csv { path: path.into(), source };
        w.write_record(&s.header).map_err(csv_err)?;
        for row in &s.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| IoError::Format { path: path.into(), message: e.to_string() })?;
        out.push_str(&String::from_utf8(bytes).expect("csv output is UTF-8"));
    }
    std::fs::write(path, out).map_err(file_error(path))
}

/// Parsed section: header and rows keyed by column name.
struct Table {
    path: PathBuf,
    section: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn col(&self, name: &str) -> Result<usize, IoError> {
        self.header.iter().position(|h| h == name).ok_or_else(|| IoError::Format {
            path: self.path.clone(),
            message: format!("section `{}` has no column `{name}`", self.section),
        })
    }

    fn check_header(&self, expected: &[&str]) -> Result<(), IoError> {
        if self.header != expected {
            return Err(IoError::Format {
                path: self.path.clone(),
                message: format!("section `{}` has columns {:?}, expected {:?}", self.section, self.header, expected),
            });
        }
        Ok(())
    }

    fn bad(&self, message: impl Into<String>) -> IoError {
        IoError::Format { path: self.path.clone(), message: format!("section `{}`: {}", self.section, message.into()) }
    }

    fn parse<T: std::str::FromStr>(&self, row: &[String], col: &str) -> Result<T, IoError> {
        let i = self.col(col)?;
        row[i].parse().map_err(|_| self.bad(format!("cannot parse `{}` in column `{col}`", row[i])))
    }

    fn opt_f64(&self, row: &[String], col: &str) -> Result<Option<f64>, IoError> {
        let i = self.col(col)?;
        if row[i] == "NA" {
            Ok(None)
        } else {
            self.parse(row, col).map(Some)
        }
    }

    fn meta(&self) -> BTreeMap<String, String> {
        self.rows.iter().map(|r| (r[0].clone(), r[1].clone())).collect()
    }
}

fn read_sections(path: &Path, kind: &str) -> Result<BTreeMap<String, Table>, IoError> {
    let text = std::fs::read_to_string(path).map_err(file_error(path))?;
    let mut lines = text.split_inclusive('\n');
    let expected = format!("# geocv {kind} {SCHEMA_VERSION}");
    let first = lines.next().unwrap_or("").trim_end();
    if first != expected {
        return Err(IoError::Schema { path: path.into(), expected, found: first.into() });
    }
    let mut blocks: Vec<(String, String)> = Vec::new();
    for line in lines {
        if let Some(name) = line.strip_prefix("# section ") {
            blocks.push((name.trim().into(), String::new()));
        } else if let Some((_, body)) = blocks.last_mut() {
            body.push_str(line);
        } else {
            return Err(IoError::Format { path: path.into(), message: "data before the first section".into() });
        }
    }
    let mut tables = BTreeMap::new();
    for (name, body) in blocks {
        let mut r = csv::ReaderBuilder::new().from_reader(body.as_bytes());
        let csv_err = |source| IoError::Csv { path: path.into(), source };
        let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(String::from).collect()).map_err(csv_err))
            .collect::<Result<Vec<Vec<String>>, _>>()?;
        tables.insert(name.clone(), Table { path: path.into(), section: name, header, rows });
    }
    Ok(tables)
}

fn take(tables: &mut BTreeMap<String, Table>, path: &Path, name: &str) -> Result<Table, IoError> {
    tables
        .remove(name)
        .ok_or_else(|| IoError::Format { path: path.into(), message: format!("missing section `{name}`") })
}

fn meta_get<T: std::str::FromStr>(m: &BTreeMap<String, String>, t: &Table, key: &str) -> Result<T, IoError> {
    let v = m.get(key).ok_or_else(|| t.bad(format!("missing key `{key}`")))?;
    v.parse().map_err(|_| t.bad(format!("cannot parse `{v}` for key `{key}`")))
}

fn meta_opt(m: &BTreeMap<String, String>, t: &Table, key: &str) -> Result<Option<f64>, IoError> {
    match m.get(key).map(String::as_str) {
        None | Some("NA") => Ok(None),
        Some(_) => meta_get(m, t, key).map(Some),
    }
}

const THETA_COLS: [&str; 5] = ["name", "theta_hat", "prior_mean", "prior_sd", "gradient"];
const FIXED_COLS: [&str; 5] = ["name", "mean", "sd", "prior_mean", "prior_sd"];
const EST_COLS: [&str; 3] = ["index", "mean", "sd"];
const OBS_COLS: [&str; 5] = ["index", "lp_mean", "lp_sd", "fitted_mean", "fitted_sd"];
const SLICE_COLS: [&str; 8] = ["name", "theta_hat", "prior_mean", "prior_sd", "grid_sd", "k", "theta", "log_posterior"];

pub fn write_fit(path: &Path, fit: &FitSummary) -> Result<(), IoError> {
    let d = &fit.diagnostics;
    let mut sections = vec![meta(vec![
        ("formula", fit.spec.to_string()),
        ("family", fit.spec.family.to_string()),
        ("log_marginal", num(fit.log_marginal)),
        ("noise_sd", opt_num(fit.noise_sd)),
        ("range", opt_num(fit.spde.map(|s| s.range))),
        ("marginal_sd", opt_num(fit.spde.map(|s| s.marginal_sd))),
        ("evaluations", d.evaluations.to_string()),
        ("starts", d.starts.to_string()),
        ("separation", d.separation.to_string()),
    ])];
    let mut theta = Section::new("theta", &THETA_COLS);
    for (i, name) in fit.theta_names.iter().enumerate() {
        let (m, s) = fit.theta_prior[i];
        theta.push(vec![name.clone(), num(fit.theta_hat[i]), num(m), num(s), num(d.gradient[i])]);
    }
    sections.push(theta);
    let mut fixed = Section::new("fixed", &FIXED_COLS);
    for (i, name) in fit.fixed_names.iter().enumerate() {
        let (b, (m, s)) = (fit.beta[i], fit.fixed_prior[i]);
        fixed.push(vec![name.clone(), num(b.mean), num(b.sd), num(m), num(s)]);
    }
    sections.push(fixed);
    let mut random = Section::new("random", &EST_COLS);
    for (i, e) in fit.u.iter().enumerate() {
        random.push(vec![i.to_string(), num(e.mean), num(e.sd)]);
    }
    sections.push(random);
    let mut obs = Section::new("observations", &OBS_COLS);
    for (i, (lp, f)) in fit.linear_predictor.iter().zip(&fit.fitted).enumerate() {
        obs.push(vec![i.to_string(), num(lp.mean), num(lp.sd), num(f.mean), num(f.sd)]);
    }
    sections.push(obs);
    let mut slices = Section::new("slices", &SLICE_COLS);
    for s in &fit.hyper_slices {
        for (k, (t, lp)) in s.grid.iter().zip(&s.log_posterior).enumerate() {
            slices.push(vec![
                s.name.clone(),
                num(s.theta_hat),
                num(s.prior_mean),
                num(s.prior_sd),
                num(s.grid_sd),
                k.to_string(),
                num(*t),
                num(*lp),
            ]);
        }
    }
    sections.push(slices);
    let mut warnings = Section::new("warnings", &["message"]);
    for w in &d.warnings {
        warnings.push(vec![w.clone()]);
    }
    sections.push(warnings);
    write_sections(path, "fit", &sections)
}

pub fn read_fit(path: &Path) -> Result<FitSummary, IoError> {
    let mut t = read_sections(path, "fit")?;
    let meta_t = take(&mut t, path, "meta")?;
    let m = meta_t.meta();
    let formula: String = meta_get(&m, &meta_t, "formula")?;
    let family: Family = meta_get(&m, &meta_t, "family")?;
    let spec: ModelSpec = formula.parse().map_err(|e| meta_t.bad(format!("formula: {e}")))?;
    let spec = spec.with_family(family);
    let spde = match (meta_opt(&m, &meta_t, "range")?, meta_opt(&m, &meta_t, "marginal_sd")?) {
        (Some(range), Some(marginal_sd)) => Some(SpdeSummaries { range, marginal_sd }),
        _ => None,
    };

    let theta = take(&mut t, path, "theta")?;
    theta.check_header(&THETA_COLS)?;
    let mut theta_names = Vec::new();
    let mut theta_hat = Vec::new();
    let mut theta_prior = Vec::new();
    let mut gradient = Vec::new();
    for r in &theta.rows {
        theta_names.push(r[0].clone());
        theta_hat.push(theta.parse(r, "theta_hat")?);
        theta_prior.push((theta.parse(r, "prior_mean")?, theta.parse(r, "prior_sd")?));
        gradient.push(theta.parse(r, "gradient")?);
    }

    let fixed = take(&mut t, path, "fixed")?;
    fixed.check_header(&FIXED_COLS)?;
    let mut fixed_names = Vec::new();
    let mut beta = Vec::new();
    let mut fixed_prior = Vec::new();
    for r in &fixed.rows {
        fixed_names.push(r[0].clone());
        beta.push(Estimate { mean: fixed.parse(r, "mean")?, sd: fixed.parse(r, "sd")? });
        fixed_prior.push((fixed.parse(r, "prior_mean")?, fixed.parse(r, "prior_sd")?));
    }

    let random = take(&mut t, path, "random")?;
    random.check_header(&EST_COLS)?;
    let u = random
        .rows
        .iter()
        .map(|r| Ok(Estimate { mean: random.parse(r, "mean")?, sd: random.parse(r, "sd")? }))
        .collect::<Result<Vec<_>, IoError>>()?;

    let obs = take(&mut t, path, "observations")?;
    obs.check_header(&OBS_COLS)?;
    let mut linear_predictor = Vec::new();
    let mut fitted = Vec::new();
    for r in &obs.rows {
        linear_predictor.push(Estimate { mean: obs.parse(r, "lp_mean")?, sd: obs.parse(r, "lp_sd")? });
        fitted.push(Estimate { mean: obs.parse(r, "fitted_mean")?, sd: obs.parse(r, "fitted_sd")? });
    }

    let st = take(&mut t, path, "slices")?;
    st.check_header(&SLICE_COLS)?;
    let mut hyper_slices: Vec<HyperSlice> = Vec::new();
    for r in &st.rows {
        let k: usize = st.parse(r, "k")?;
        if k == 0 {
            hyper_slices.push(HyperSlice {
                name: r[0].clone(),
                theta_hat: st.parse(r, "theta_hat")?,
                prior_mean: st.parse(r, "prior_mean")?,
                prior_sd: st.parse(r, "prior_sd")?,
                grid_sd: st.parse(r, "grid_sd")?,
                grid: Vec::new(),
                log_posterior: Vec::new(),
            });
        }
        let s = hyper_slices.last_mut().ok_or_else(|| st.bad("slice does not start at k = 0"))?;
        if s.grid.len() != k {
            return Err(st.bad("slice points out of order"));
        }
        s.grid.push(st.parse(r, "theta")?);
        s.log_posterior.push(st.parse(r, "log_posterior")?);
    }

    let wt = take(&mut t, path, "warnings")?;
    let warnings = wt.rows.iter().map(|r| r[0].clone()).collect();

    Ok(FitSummary {
        spec,
        theta_names,
        theta_hat,
        theta_prior,
        fixed_names,
        beta,
        fixed_prior,
        u,
        linear_predictor,
        fitted,
        log_marginal: meta_get(&m, &meta_t, "log_marginal")?,
        hyper_slices,
        spde,
        noise_sd: meta_opt(&m, &meta_t, "noise_sd")?,
        diagnostics: FitDiagnostics {
            evaluations: meta_get(&m, &meta_t, "evaluations")?,
            starts: meta_get(&m, &meta_t, "starts")?,
            gradient,
            separation: meta_get(&m, &meta_t, "separation")?,
            warnings,
        },
    })
}

const ITER_COLS: [&str; 11] =
    ["iteration", "holdout", "x", "y", "observed", "removed", "model", "status", "mean", "sd", "message"];
const METRIC_COLS: [&str; 10] =
    ["model", "n_success", "n_failed", "mae", "mae_lower", "mae_upper", "rmse", "rmse_lower", "rmse_upper", "formula"];

pub fn write_sloo(path: &Path, result: &SlooResult) -> Result<(), IoError> {
    let mut pairs = vec![
        ("radius", num(result.radius)),
        ("alpha", num(result.alpha)),
        ("seed", result.seed.to_string()),
        ("n_models", result.models.len().to_string()),
        ("ss", result.iterations.len().to_string()),
    ];
    let ws: Vec<String> =
        result.warm_starts.iter().map(|w| w.iter().map(|v| num(*v)).collect::<Vec<_>>().join(" ")).collect();
    let mut models = Section::new("models", &["model", "formula", "warm_start"]);
    for (i, f) in result.models.iter().enumerate() {
        models.push(vec![(i + 1).to_string(), f.clone(), ws.get(i).cloned().unwrap_or_default()]);
    }
    let mut iters = Section::new("iterations", &ITER_COLS);
    for it in &result.iterations {
        for (m, o) in it.outcomes.iter().enumerate() {
            let (status, mean, sd, message) = match o {
                ModelOutcome::Predicted { mean, sd } => ("ok", num(*mean), num(*sd), String::new()),
                ModelOutcome::Failed(msg) => ("failed", "NA".into(), "NA".into(), msg.clone()),
            };
            iters.push(vec![
                it.iteration.to_string(),
                it.holdout.to_string(),
                num(it.coord.x),
                num(it.coord.y),
                num(it.observed),
                it.removed.to_string(),
                (m + 1).to_string(),
                status.into(),
                mean,
                sd,
                message,
            ]);
        }
    }
    let mut metrics = Section::new("metrics", &METRIC_COLS);
    for (i, mm) in result.metrics.iter().enumerate() {
        let e = mm.metrics;
        let f = |g: fn(&ErrorMetrics) -> f64| opt_num(e.as_ref().map(g));
        metrics.push(vec![
            (i + 1).to_string(),
            mm.n_success.to_string(),
            mm.n_failed.to_string(),
            f(|e| e.mae.value),
            f(|e| e.mae.lower),
            f(|e| e.mae.upper),
            f(|e| e.rmse.value),
            f(|e| e.rmse.lower),
            f(|e| e.rmse.upper),
            mm.model.clone(),
        ]);
    }
    pairs.sort_by_key(|p| p.0);
    write_sections(path, "sloo-result", &[meta(pairs), models, iters, metrics])
}

pub fn read_sloo(path: &Path) -> Result<SlooResult, IoError> {
    let mut t = read_sections(path, "sloo-result")?;
    let meta_t = take(&mut t, path, "meta")?;
    let m = meta_t.meta();
    let n_models: usize = meta_get(&m, &meta_t, "n_models")?;

    let mt = take(&mut t, path, "models")?;
    let models: Vec<String> = mt.rows.iter().map(|r| r[1].clone()).collect();
    let warm_starts = mt
        .rows
        .iter()
        .map(|r| {
            r[2].split_whitespace().map(|v| v.parse::<f64>().map_err(|_| mt.bad("bad warm start"))).collect()
        })
        .collect::<Result<Vec<Vec<f64>>, IoError>>()?;
    if models.len() != n_models {
        return Err(mt.bad("model count does not match meta"));
    }

    let it = take(&mut t, path, "iterations")?;
    it.check_header(&ITER_COLS)?;
    let mut iterations: Vec<SlooIteration> = Vec::new();
    for r in &it.rows {
        let k: usize = it.parse(r, "iteration")?;
        let model: usize = it.parse(r, "model")?;
        if model == 1 {
            iterations.push(SlooIteration {
                iteration: k,
                holdout: it.parse(r, "holdout")?,
                coord: Point2::new(it.parse(r, "x")?, it.parse(r, "y")?),
                observed: it.parse(r, "observed")?,
                removed: it.parse(r, "removed")?,
                outcomes: Vec::new(),
            });
        }
        let cur = iterations.last_mut().ok_or_else(|| it.bad("iteration rows must start with model 1"))?;
        if cur.iteration != k || cur.outcomes.len() + 1 != model {
            return Err(it.bad("iteration rows out of order"));
        }
        let outcome = match r[it.col("status")?].as_str() {
            "ok" => ModelOutcome::Predicted { mean: it.parse(r, "mean")?, sd: it.parse(r, "sd")? },
            "failed" => ModelOutcome::Failed(r[it.col("message")?].clone()),
            other => return Err(it.bad(format!("unknown status `{other}`"))),
        };
        cur.outcomes.push(outcome);
    }

    let mt = take(&mut t, path, "metrics")?;
    mt.check_header(&METRIC_COLS)?;
    let metrics = mt
        .rows
        .iter()
        .map(|r| {
            let vals = ["mae", "mae_lower", "mae_upper", "rmse", "rmse_lower", "rmse_upper"]
                .iter()
                .map(|c| mt.opt_f64(r, c))
                .collect::<Result<Vec<_>, _>>()?;
            let metrics = match vals.as_slice() {
                [Some(a), Some(b), Some(c), Some(d), Some(e), Some(f)] => Some(ErrorMetrics {
                    mae: Interval { value: *a, lower: *b, upper: *c },
                    rmse: Interval { value: *d, lower: *e, upper: *f },
                }),
                _ => None,
            };
            Ok(ModelMetrics {
                model: r[mt.col("formula")?].clone(),
                n_success: mt.parse(r, "n_success")?,
                n_failed: mt.parse(r, "n_failed")?,
                metrics,
            })
        })
        .collect::<Result<Vec<_>, IoError>>()?;

    Ok(SlooResult {
        models,
        radius: meta_get(&m, &meta_t, "radius")?,
        alpha: meta_get(&m, &meta_t, "alpha")?,
        seed: meta_get(&m, &meta_t, "seed")?,
        warm_starts,
        iterations,
        metrics,
    })
}

const CAL_COLS: [&str; 5] = ["index", "observed", "mean", "sd", "pit"];

pub fn write_calibration(path: &Path, report: &CalibrationReport) -> Result<(), IoError> {
    let m = meta(vec![("ks_statistic", num(report.ks_statistic)), ("variant", report.variant.to_string())]);
    let mut rows = Section::new("observations", &CAL_COLS);
    for (i, (o, p)) in report.obs_pred.iter().zip(&report.pit).enumerate() {
        rows.push(vec![i.to_string(), num(o.observed), num(o.mean), num(o.sd), num(*p)]);
    }
    write_sections(path, "calibration", &[m, rows])
}

pub fn read_calibration(path: &Path) -> Result<CalibrationReport, IoError> {
    let mut t = read_sections(path, "calibration")?;
    let meta_t = take(&mut t, path, "meta")?;
    let m = meta_t.meta();
    let variant: String = meta_get(&m, &meta_t, "variant")?;
    let variant: PitVariant = variant.parse().map_err(|_| meta_t.bad("unknown PIT variant"))?;
    let rows = take(&mut t, path, "observations")?;
    rows.check_header(&CAL_COLS)?;
    let mut obs_pred = Vec::new();
    let mut pit = Vec::new();
    for r in &rows.rows {
        obs_pred.push(ObsPred {
            observed: rows.parse(r, "observed")?,
            mean: rows.parse(r, "mean")?,
            sd: rows.parse(r, "sd")?,
        });
        pit.push(rows.parse(r, "pit")?);
    }
    Ok(CalibrationReport { variant, pit, ks_statistic: meta_get(&m, &meta_t, "ks_statistic")?, obs_pred })
}

pub fn write_mesh(path: &Path, mesh: &Mesh) -> Result<(), IoError> {
    let mut v = Section::new("vertices", &["index", "x", "y", "boundary"]);
    for (i, (p, b)) in mesh.vertices().iter().zip(mesh.boundary_flags()).enumerate() {
        v.push(vec![i.to_string(), num(p.x), num(p.y), b.to_string()]);
    }
    let mut t = Section::new("triangles", &["index", "a", "b", "c"]);
    for (i, tri) in mesh.triangles().iter().enumerate() {
        t.push(vec![i.to_string(), tri[0].to_string(), tri[1].to_string(), tri[2].to_string()]);
    }
    write_sections(path, "mesh", &[v, t])
}

pub fn read_mesh(path: &Path) -> Result<Mesh, IoError> {
    let mut t = read_sections(path, "mesh")?;
    let vt = take(&mut t, path, "vertices")?;
    let mut vertices = Vec::new();
    let mut flags = Vec::new();
    for r in &vt.rows {
        vertices.push(Point2::new(vt.parse(r, "x")?, vt.parse(r, "y")?));
        flags.push(vt.parse(r, "boundary")?);
    }
    let tt = take(&mut t, path, "triangles")?;
    let triangles = tt
        .rows
        .iter()
        .map(|r| Ok([tt.parse(r, "a")?, tt.parse(r, "b")?, tt.parse(r, "c")?]))
        .collect::<Result<Vec<[usize; 3]>, IoError>>()?;
    Ok(Mesh::new(vertices, triangles, flags)?)
}
