use super::svg::{range_of, Frame, Svg};
use super::{sig4, slug, Cell, PlotBundle, Table, Theme, VizError};
use geocv_core::diagnostics::CalibrationReport;
use geocv_core::model::{Estimate, FitSummary, HyperSlice};
use std::f64::consts::PI;
use std::str::FromStr;

const Z95: f64 = 1.959963984540054;
const CURVE_POINTS: usize = 201;

/// Panel groups of [`plot_model_summaries`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Fixed,
    Hyper,
    Random,
    Predictor,
}

impl Which {
    pub const ALL: [Which; 4] = [Which::Fixed, Which::Hyper, Which::Random, Which::Predictor];
}

impl FromStr for Which {
    type Err = VizError;

    fn from_str(s: &str) -> Result<Self, VizError> {
        match s {
            "fixed" => Ok(Which::Fixed),
            "hyper" => Ok(Which::Hyper),
            "random" => Ok(Which::Random),
            "predictor" => Ok(Which::Predictor),
            _ => Err(VizError::UnknownPanel(s.into())),
        }
    }
}

fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

fn density_grid(mean: f64, sd: f64) -> Vec<f64> {
    (0..CURVE_POINTS).map(|k| mean - 4.0 * sd + 8.0 * sd * k as f64 / (CURVE_POINTS - 1) as f64).collect()
}

fn to_px(f: &Frame, xs: &[f64], ys: &[f64]) -> Vec<(f64, f64)> {
    xs.iter().zip(ys).map(|(&x, &y)| (f.px(x), f.py(y))).collect()
}

/// Posterior curve (black), prior curve (blue, dashed) and interval verticals.
fn density_panel(
    theme: &Theme,
    title: &str,
    xlabel: &str,
    xs: &[f64],
    posterior: &[f64],
    prior: &[f64],
    interval: (f64, f64),
) -> (String, String) {
    let ymax = range_of(posterior).1.max(0.0);
    let f = Frame::new(theme.width, theme.height, range_of(xs), (0.0, ymax));
    let mut svg = Svg::new(theme.width, theme.height, title);
    svg.begin_plot(&f, xlabel, "density");
    let clipped: Vec<f64> = prior.iter().map(|&p| p.min(f.y.1)).collect();
    svg.polyline("prior", &to_px(&f, xs, &clipped), &theme.prior, 1.2, true);
    svg.polyline("curve", &to_px(&f, xs, posterior), &theme.ink, 1.5, false);
    for x in [interval.0, interval.1] {
        svg.line("interval", (f.px(x), f.py(f.y.0)), (f.px(x), f.py(f.y.1)), &theme.accent, 1.0);
    }
    svg.end_plot();
    svg.text(
        theme.width - 18.0,
        44.0,
        "end",
        &theme.ink,
        &format!("95% [{}, {}]", sig4(interval.0), sig4(interval.1)),
    );
    let mut t = Table::new(&["x", "posterior", "prior"]);
    for k in 0..xs.len() {
        t.row(&[xs[k].into(), posterior[k].into(), prior[k].into()]);
    }
    (svg.finish(), t.finish())
}

fn fixed_panel(theme: &Theme, name: &str, est: &Estimate, prior: (f64, f64)) -> (String, String) {
    let sd = if est.sd > 0.0 { est.sd } else { f64::EPSILON * est.mean.abs().max(1.0) };
    let xs = density_grid(est.mean, sd);
    let post: Vec<f64> = xs.iter().map(|&x| normal_pdf(x, est.mean, sd)).collect();
    let pri: Vec<f64> = xs.iter().map(|&x| normal_pdf(x, prior.0, prior.1)).collect();
    let interval = (est.mean - Z95 * est.sd, est.mean + Z95 * est.sd);
    density_panel(theme, name, name, &xs, &post, &pri, interval)
}

fn hyper_panel(theme: &Theme, s: &HyperSlice) -> (String, String) {
    let peak = range_of(&s.log_posterior).1;
    let raw: Vec<f64> = s.log_posterior.iter().map(|lp| (lp - peak).exp()).collect();
    let area: f64 = s.grid.windows(2).zip(raw.windows(2)).map(|(g, r)| 0.5 * (g[1] - g[0]) * (r[0] + r[1])).sum();
    let post: Vec<f64> = raw.iter().map(|r| if area > 0.0 { r / area } else { 0.0 }).collect();
    let pri: Vec<f64> = s.grid.iter().map(|&x| normal_pdf(x, s.prior_mean, s.prior_sd)).collect();
    let interval = (s.theta_hat - Z95 * s.grid_sd, s.theta_hat + Z95 * s.grid_sd);
    density_panel(theme, &format!("{} (conditional slice)", s.name), &s.name, &s.grid, &post, &pri, interval)
}

/// Means with 95% interval bars against their index.
fn index_panel(theme: &Theme, title: &str, xlabel: &str, values: &[Estimate]) -> (String, String) {
    let lower: Vec<f64> = values.iter().map(|e| e.mean - Z95 * e.sd).collect();
    let upper: Vec<f64> = values.iter().map(|e| e.mean + Z95 * e.sd).collect();
    let y = (range_of(&lower).0, range_of(&upper).1);
    let f = Frame::new(theme.width, theme.height, (0.0, values.len().saturating_sub(1) as f64), y);
    let mut svg = Svg::new(theme.width, theme.height, title);
    svg.begin_plot(&f, xlabel, "mean and 95% interval");
    for (i, e) in values.iter().enumerate() {
        let x = f.px(i as f64);
        svg.line("interval", (x, f.py(lower[i])), (x, f.py(upper[i])), &theme.muted, 1.0);
        svg.circle("mark", (x, f.py(e.mean)), 1.8, &theme.ink, "none");
    }
    svg.end_plot();
    let mut t = Table::new(&["index", "mean", "lower", "upper"]);
    for (i, e) in values.iter().enumerate() {
        t.row(&[Cell::Int(i), e.mean.into(), lower[i].into(), upper[i].into()]);
    }
    (svg.finish(), t.finish())
}

/// Fixed-effect, hyperparameter, random-effect and predictor panels.
///
/// `which` names panel groups (`fixed`, `hyper`, `random`, `predictor`); empty selects all.
pub fn plot_model_summaries(
    fit: &FitSummary,
    which: &[&str],
    prefix: &str,
    theme: &Theme,
) -> Result<PlotBundle, VizError> {
    let selected: Vec<Which> =
        if which.is_empty() { Which::ALL.to_vec() } else { which.iter().map(|w| w.parse()).collect::<Result<_, _>>()? };
    let mut bundle = PlotBundle::new(prefix, theme);
    if selected.contains(&Which::Fixed) {
        for (k, name) in fit.fixed_names.iter().enumerate() {
            let prior = fit.fixed_prior.get(k).copied().unwrap_or((0.0, f64::INFINITY));
            let (svg, csv) = fixed_panel(theme, name, &fit.beta[k], prior);
            bundle.push(format!("fixed_{}", slug(name)), svg, csv)?;
        }
    }
    if selected.contains(&Which::Hyper) {
        for s in &fit.hyper_slices {
            let (svg, csv) = hyper_panel(theme, s);
            bundle.push(format!("hyper_{}", slug(&s.name)), svg, csv)?;
        }
    }
    if selected.contains(&Which::Random) && fit.spec.spatial {
        let (svg, csv) = index_panel(theme, "spatial effect", "mesh vertex", &fit.u);
        bundle.push("random_effect".into(), svg, csv)?;
    }
    if selected.contains(&Which::Predictor) {
        let (svg, csv) = index_panel(theme, "linear predictor", "observation", &fit.linear_predictor);
        bundle.push("linear_predictor".into(), svg, csv)?;
        let (svg, csv) = index_panel(theme, "fitted values", "observation", &fit.fitted);
        bundle.push("fitted_values".into(), svg, csv)?;
    }
    Ok(bundle)
}

/// PIT histogram and observed-versus-predicted scatter.
pub fn plot_residuals(report: &CalibrationReport, binwidth: f64, prefix: &str, theme: &Theme) -> Result<PlotBundle, VizError> {
    if !(binwidth > 0.0 && binwidth <= 1.0) {
        return Err(VizError::InvalidBinwidth(binwidth));
    }
    let mut bundle = PlotBundle::new(prefix, theme);
    let bins = ((1.0 / binwidth) - 1e-9).ceil().max(1.0) as usize;
    let mut counts = vec![0usize; bins];
    for &u in &report.pit {
        counts[((u / binwidth).floor().max(0.0) as usize).min(bins - 1)] += 1;
    }
    let n = report.pit.len();
    let expected = n as f64 * binwidth;
    let top = (counts.iter().copied().max().unwrap_or(0) as f64).max(expected);
    let f = Frame::new(theme.width, theme.height, (0.0, 1.0), (0.0, top));
    let mut svg = Svg::new(theme.width, theme.height, &format!("PIT ({}), KS = {}", report.variant, sig4(report.ks_statistic)));
    svg.begin_plot(&f, "PIT", "count");
    let mut t = Table::new(&["lower", "upper", "count"]);
    for (b, &c) in counts.iter().enumerate() {
        let lo = b as f64 * binwidth;
        let hi = ((b + 1) as f64 * binwidth).min(1.0);
        svg.rect("bar", f.px(lo), f.py(c as f64), f.px(hi) - f.px(lo), f.py(0.0) - f.py(c as f64), &theme.muted);
        t.row(&[lo.into(), hi.into(), Cell::Int(c)]);
    }
    svg.line("reference", (f.px(0.0), f.py(expected)), (f.px(1.0), f.py(expected)), &theme.accent, 1.0);
    svg.end_plot();
    bundle.push("pit_histogram".into(), svg.finish(), t.finish())?;

    let obs: Vec<f64> = report.obs_pred.iter().map(|o| o.observed).collect();
    let pred: Vec<f64> = report.obs_pred.iter().map(|o| o.mean).collect();
    let (a, b) = (range_of(&obs), range_of(&pred));
    let lim = (a.0.min(b.0), a.1.max(b.1));
    let f = Frame::new(theme.width, theme.height, lim, lim);
    let mut svg = Svg::new(theme.width, theme.height, "observed vs predicted");
    svg.begin_plot(&f, "predicted", "observed");
    svg.line("identity", (f.px(f.x.0), f.py(f.x.0)), (f.px(f.x.1), f.py(f.x.1)), &theme.accent, 1.0);
    let mut t = Table::new(&["observed", "predicted", "sd"]);
    for o in &report.obs_pred {
        svg.circle("mark", (f.px(o.mean), f.py(o.observed)), 2.5, "none", &theme.ink);
        t.row(&[o.observed.into(), o.mean.into(), o.sd.into()]);
    }
    svg.end_plot();
    bundle.push("obs_vs_pred".into(), svg.finish(), t.finish())?;
    Ok(bundle)
}
