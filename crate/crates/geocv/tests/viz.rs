use geocv::io::{synth_dataset, Domain, SynthSpec};
use geocv::viz::*;
use geocv_core::diagnostics::{CalibrationReport, ObsPred, PitVariant};
use geocv_core::field::project_values;
use geocv_core::formula::Family;
use geocv_core::mesh::{build_mesh, fem_matrices, Mesh, MeshConfig, Point2};
use geocv_core::model::{fit_dataset, Dataset, FitConfig, FitResult, Priors};
use geocv_core::sloocv::{run_sloo, Radius, SlooConfig, SlooResult};
use geocv_core::spde::SpdeParams;

fn problem() -> (Dataset, Mesh) {
    let spec = SynthSpec {
        seed: 21,
        n: 30,
        spde: Some(SpdeParams::from_range_sd(0.5, 1.0)),
        beta: vec![1.0, 0.5, -0.5, 0.2],
        noise_sd: 0.3,
        domain: Domain::unit(),
    };
    let (data, _) = synth_dataset(&spec).unwrap();
    let mesh = build_mesh(data.coords(), &MeshConfig::new(0.3, 0.6, 0.0)).unwrap();
    (data, mesh)
}

fn fit(data: &Dataset, mesh: &Mesh, formula: &str) -> FitResult {
    let fem = fem_matrices(mesh);
    let priors = Priors::default_for(data.coords(), data.response(), Family::Normal);
    fit_dataset(data, Some(mesh), Some(&fem), &formula.parse().unwrap(), &FitConfig::new(priors)).unwrap()
}

fn sloo(data: &Dataset, mesh: &Mesh, ss: usize) -> SlooResult {
    let fem = fem_matrices(mesh);
    let models = vec!["response ~ x1 + spatial".parse().unwrap(), "response ~ x1".parse().unwrap()];
    run_sloo(data, mesh, &fem, &SlooConfig::new(models, ss, Radius::Fixed(0.15), 0.05, 4)).unwrap()
}

fn attr(tag: &str, name: &str) -> f64 {
    let key = format!("{name}=\"");
    let start = tag.find(&key).unwrap() + key.len();
    let end = start + tag[start..].find('"').unwrap();
    tag[start..end].parse().unwrap()
}

fn tags<'a>(svg: &'a str, prefix: &str) -> Vec<&'a str> {
    svg.lines().filter(|l| l.starts_with(prefix)).collect()
}

/// `(sx, ox, sy, oy)` of the data group.
fn affine(svg: &str) -> (f64, f64, f64, f64) {
    let g = tags(svg, "<g class=\"data\"")[0];
    (attr(g, "data-sx"), attr(g, "data-ox"), attr(g, "data-sy"), attr(g, "data-oy"))
}

fn csv_column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap_or(f64::NAN)).collect()
}

#[test]
fn full_model_panel_layout() {
    let (data, mesh) = problem();
    let f = fit(&data, &mesh, "response ~ x1 + x2 + x3 + spatial");
    let b = plot_model_summaries(&f.summary, &[], "model1", &Theme::default()).unwrap();
    assert_eq!(
        b.names(),
        [
            "fixed_intercept",
            "fixed_x1",
            "fixed_x2",
            "fixed_x3",
            "hyper_log_kappa",
            "hyper_log_tau",
            "hyper_log_noise_precision",
            "random_effect",
            "linear_predictor",
            "fitted_values"
        ]
    );
    let fixed = plot_model_summaries(&f.summary, &["fixed"], "m", &Theme::default()).unwrap();
    assert_eq!(fixed.names().len(), 4);
    assert!(fixed.names().iter().all(|n| n.starts_with("fixed_")));
    assert!(matches!(
        plot_model_summaries(&f.summary, &["fixed", "bogus"], "m", &Theme::default()),
        Err(VizError::UnknownPanel(p)) if p == "bogus"
    ));

    let plain = fit(&data, &mesh, "response ~ x1");
    let b = plot_model_summaries(&plain.summary, &[], "model2", &Theme::default()).unwrap();
    assert_eq!(b.names(), ["fixed_intercept", "fixed_x1", "hyper_log_noise_precision", "linear_predictor", "fitted_values"]);
}

#[test]
fn density_curves_round_trip_through_affine_map() {
    let (data, mesh) = problem();
    let f = fit(&data, &mesh, "response ~ x1 + spatial");
    let b = plot_model_summaries(&f.summary, &[], "m", &Theme::default()).unwrap();
    for name in ["fixed_x1", "hyper_log_kappa"] {
        let p = b.panel(name).unwrap();
        let (sx, ox, sy, oy) = affine(&p.svg);
        let curve = tags(&p.svg, "<polyline class=\"curve\"")[0];
        let start = curve.find("points=\"").unwrap() + 8;
        let pts: Vec<(f64, f64)> = curve[start..start + curve[start..].find('"').unwrap()]
            .split(' ')
            .map(|xy| {
                let (x, y) = xy.split_once(',').unwrap();
                ((x.parse::<f64>().unwrap() - ox) / sx, (y.parse::<f64>().unwrap() - oy) / sy)
            })
            .collect();
        let xs = csv_column(&p.csv, "x");
        let ys = csv_column(&p.csv, "posterior");
        assert_eq!(pts.len(), xs.len());
        if name == "fixed_x1" {
            assert_eq!(xs.len(), 201);
            let e = f.summary.beta[1];
            assert!((xs[0] - (e.mean - 4.0 * e.sd)).abs() < 1e-12 && (xs[200] - (e.mean + 4.0 * e.sd)).abs() < 1e-12);
        }
        for (k, (x, y)) in pts.iter().enumerate() {
            assert!((x - xs[k]).abs() < 1e-9 * xs[k].abs().max(1.0), "{name} x[{k}]");
            assert!((y - ys[k]).abs() < 1e-9 * ys[k].abs().max(1.0), "{name} y[{k}]");
        }
    }
}

#[test]
fn emitters_are_deterministic() {
    let (data, mesh) = problem();
    let f = fit(&data, &mesh, "response ~ x1 + spatial");
    let t = Theme::default();
    assert_eq!(plot_model_summaries(&f.summary, &[], "m", &t).unwrap(), plot_model_summaries(&f.summary, &[], "m", &t).unwrap());
    let r = sloo(&data, &mesh, 5);
    assert_eq!(plot_sloo(&r, data.coords(), 0.15, "s", &t).unwrap(), plot_sloo(&r, data.coords(), 0.15, "s", &t).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let written = plot_mesh(&mesh, data.coords(), "mesh", &t).unwrap().write(dir.path()).unwrap();
    let names: Vec<String> = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["mesh_triangles.svg", "mesh_triangles.csv"]);
    let svg = std::fs::read_to_string(&written[0]).unwrap();
    assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\"") && svg.ends_with("</svg>\n"));
    assert_eq!(tags(&svg, "<line class=\"edge\"").len(), mesh.edges().len());
    assert_eq!(tags(&svg, "<circle class=\"mark\"").len(), data.n());
}

fn report(pit: Vec<f64>) -> CalibrationReport {
    let obs_pred = pit.iter().map(|&u| ObsPred { observed: u, mean: 0.5, sd: 1.0 }).collect();
    CalibrationReport { variant: PitVariant::PlugIn, pit, ks_statistic: 0.0, obs_pred }
}

#[test]
fn pit_histogram_bins() {
    let mids: Vec<f64> = (0..10).flat_map(|b| std::iter::repeat_n(0.05 + 0.1 * b as f64, 3)).collect();
    let b = plot_residuals(&report(mids), 0.1, "m", &Theme::default()).unwrap();
    let hist = b.panel("pit_histogram").unwrap();
    let counts = csv_column(&hist.csv, "count");
    assert_eq!(counts, vec![3.0; 10]);
    assert_eq!(tags(&hist.svg, "<rect class=\"bar\"").len(), 10);
    let scatter = b.panel("obs_vs_pred").unwrap();
    assert_eq!(tags(&scatter.svg, "<circle class=\"mark\"").len(), 30);
    assert_eq!(csv_column(&scatter.csv, "observed").len(), 30);
    assert_eq!(csv_column(&plot_residuals(&report(vec![0.0, 1.0]), 0.25, "m", &Theme::default()).unwrap().panels[0].csv, "count"), [1.0, 0.0, 0.0, 1.0]);
    for bad in [0.0, -0.1, 1.5, f64::NAN] {
        assert!(matches!(plot_residuals(&report(vec![0.5]), bad, "m", &Theme::default()), Err(VizError::InvalidBinwidth(_))));
    }
}

#[test]
fn scatter_marks_map_back_to_data() {
    let pit = vec![0.1, 0.4, 0.8];
    let mut r = report(pit);
    for (k, o) in r.obs_pred.iter_mut().enumerate() {
        o.mean = 10.0 * k as f64 - 3.0;
        o.observed = 1e3 + k as f64;
    }
    let b = plot_residuals(&r, 0.5, "m", &Theme::default()).unwrap();
    let p = b.panel("obs_vs_pred").unwrap();
    let (sx, ox, sy, oy) = affine(&p.svg);
    for (k, c) in tags(&p.svg, "<circle class=\"mark\"").iter().enumerate() {
        assert!(((attr(c, "cx") - ox) / sx - r.obs_pred[k].mean).abs() < 1e-9);
        assert!(((attr(c, "cy") - oy) / sy - r.obs_pred[k].observed).abs() < 1e-9);
    }
}

#[test]
fn sloo_map_and_annotations() {
    let (data, mesh) = problem();
    let all = sloo(&data, &mesh, data.n());
    let b = plot_sloo(&all, data.coords(), 0.15, "sloo", &Theme::default()).unwrap();
    assert_eq!(b.names(), ["obs_pred", "map"]);
    let map = &b.panel("map").unwrap().svg;
    assert_eq!(tags(map, "<circle class=\"disk\"").len(), data.n());
    assert_eq!(tags(map, "<path class=\"mark\"").len(), 0);

    let some = sloo(&data, &mesh, 7);
    let b = plot_sloo(&some, data.coords(), 0.15, "sloo", &Theme::default()).unwrap();
    let map = &b.panel("map").unwrap().svg;
    assert_eq!(tags(map, "<circle class=\"disk\"").len(), 7);
    assert_eq!(tags(map, "<path class=\"mark\"").len(), data.n() - 7);
    let (sx, ox, _, _) = affine(map);
    let buffer = tags(map, "<circle class=\"buffer\"")[0];
    assert!((attr(buffer, "r") / sx - 0.15).abs() < 1e-9);
    assert!(((attr(buffer, "cx") - ox) / sx - some.iterations[0].coord.x).abs() < 1e-9);
    for label in 1..=7 {
        assert!(map.contains(&format!("fill=\"#ffffff\">{label}</text>")));
    }

    let obs = &b.panel("obs_pred").unwrap().svg;
    for m in &some.metrics {
        let e = m.metrics.unwrap();
        let expected = format!(
            "MAE {} [{}, {}]  RMSE {} [{}, {}]",
            sig4(e.mae.value),
            sig4(e.mae.lower),
            sig4(e.mae.upper),
            sig4(e.rmse.value),
            sig4(e.rmse.lower),
            sig4(e.rmse.upper)
        );
        assert_eq!(metric_annotation(m), expected);
        assert!(obs.contains(&format!(">{expected}</text>")));
    }
}

#[test]
fn field_panel_cells() {
    let (data, mesh) = problem();
    let f = fit(&data, &mesh, "response ~ x1 + spatial");
    let u: Vec<f64> = f.summary.u.iter().map(|e| e.mean).collect();
    let raster = project_values(&u, &mesh, 20, 15).unwrap();
    let square = vec![vec![
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(1.0, 1.0),
        Point2::new(0.0, 1.0),
        Point2::new(0.0, 0.0),
    ]];
    let b = plot_field(&raster, Some(&square), Some(&mesh), data.coords(), "m", &Theme::default()).unwrap();
    let p = b.panel("field").unwrap();
    let inside = raster.values.iter().filter(|v| v.is_some()).count();
    assert_eq!(tags(&p.svg, "<rect class=\"cell\"").len(), inside);
    assert_eq!(p.csv.lines().count(), 1 + 20 * 15);
    assert_eq!(tags(&p.svg, "<path class=\"polygon\"").len(), 1);
    let values = csv_column(&p.csv, "value");
    for (v, r) in values.iter().zip(&raster.values) {
        match r {
            Some(r) => assert_eq!(v, r),
            None => assert!(v.is_nan()),
        }
    }
}
