use super::svg::{range_of, Frame, Svg};
use super::{sig4, Cell, PlotBundle, Table, Theme, VizError};
use geocv_core::field::Raster;
use geocv_core::mesh::{Mesh, Point2};
use geocv_core::sloocv::{ModelMetrics, ModelOutcome, SlooResult};

fn extent(points: impl IntoIterator<Item = Point2>) -> ((f64, f64), (f64, f64)) {
    let pts: Vec<Point2> = points.into_iter().collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
    (range_of(&xs), range_of(&ys))
}

fn draw_edges(svg: &mut Svg, f: &Frame, mesh: &Mesh, stroke: &str, t: Option<&mut Table>) {
    let v = mesh.vertices();
    let mut t = t;
    for (a, b) in mesh.edges() {
        svg.line("edge", (f.px(v[a].x), f.py(v[a].y)), (f.px(v[b].x), f.py(v[b].y)), stroke, 0.5);
        if let Some(t) = t.as_deref_mut() {
            t.row(&[Cell::Text("edge".into()), v[a].x.into(), v[a].y.into(), v[b].x.into(), v[b].y.into()]);
        }
    }
}

/// Triangle edges with observation markers.
pub fn plot_mesh(mesh: &Mesh, points: &[Point2], prefix: &str, theme: &Theme) -> Result<PlotBundle, VizError> {
    let (xr, yr) = extent(mesh.vertices().iter().copied().chain(points.iter().copied()));
    let f = Frame::equal_aspect(theme.width, theme.height, xr, yr);
    let title = format!("mesh: {} vertices, {} triangles", mesh.n_vertices(), mesh.n_triangles());
    let mut svg = Svg::new(theme.width, theme.height, &title);
    svg.begin_plot(&f, "x", "y");
    let mut t = Table::new(&["kind", "x1", "y1", "x2", "y2"]);
    draw_edges(&mut svg, &f, mesh, &theme.muted, Some(&mut t));
    for p in points {
        svg.circle("mark", (f.px(p.x), f.py(p.y)), 2.0, &theme.accent, "none");
        t.row(&[Cell::Text("point".into()), p.x.into(), p.y.into(), Cell::Na, Cell::Na]);
    }
    svg.end_plot();
    let mut bundle = PlotBundle::new(prefix, theme);
    bundle.push("triangles".into(), svg.finish(), t.finish())?;
    Ok(bundle)
}

/// Linear ramp from pale to dark blue.
fn ramp(v: f64, lo: f64, hi: f64) -> String {
    let s = if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
    let (a, b) = ([247.0, 251.0, 255.0], [8.0, 48.0, 107.0]);
    let c: Vec<u8> = (0..3).map(|i| (a[i] + s * (b[i] - a[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Raster in a blue colour ramp with optional polygon outline, mesh and points.
pub fn plot_field(
    raster: &Raster,
    polygon: Option<&[Vec<Point2>]>,
    mesh: Option<&Mesh>,
    points: &[Point2],
    prefix: &str,
    theme: &Theme,
) -> Result<PlotBundle, VizError> {
    let (dx, dy) = (raster.dx, raster.dy);
    let corners = [
        Point2::new(raster.x0 - 0.5 * dx, raster.y0 - 0.5 * dy),
        Point2::new(raster.x0 + (raster.nx as f64 - 0.5) * dx, raster.y0 + (raster.ny as f64 - 0.5) * dy),
    ];
    let (xr, yr) = extent(corners.into_iter().chain(points.iter().copied()));
    let f = Frame::equal_aspect(theme.width, theme.height, xr, yr);
    let (lo, hi) = raster.value_range().unwrap_or((0.0, 0.0));
    let mut svg = Svg::new(theme.width, theme.height, "posterior mean field");
    svg.begin_plot(&f, "x", "y");
    let mut t = Table::new(&["x", "y", "value"]);
    for j in 0..raster.ny {
        for i in 0..raster.nx {
            let p = raster.node(i, j);
            let v = raster.get(i, j);
            if let Some(v) = v {
                let (x0, y1) = (f.px(p.x - 0.5 * dx), f.py(p.y + 0.5 * dy));
                let (x1, y0) = (f.px(p.x + 0.5 * dx), f.py(p.y - 0.5 * dy));
                svg.rect("cell", x0, y1, x1 - x0, y0 - y1, &ramp(v, lo, hi));
            }
            t.row(&[p.x.into(), p.y.into(), v.into()]);
        }
    }
    if let Some(mesh) = mesh {
        draw_edges(&mut svg, &f, mesh, &theme.muted, None);
    }
    if let Some(rings) = polygon {
        let rings: Vec<Vec<(f64, f64)>> =
            rings.iter().map(|r| r.iter().map(|p| (f.px(p.x), f.py(p.y))).collect()).collect();
        svg.path("polygon", &rings, &theme.ink, 1.5);
    }
    for p in points {
        svg.circle("mark", (f.px(p.x), f.py(p.y)), 1.8, &theme.ink, "none");
    }
    svg.end_plot();
    svg.text(theme.width - 18.0, 44.0, "end", &theme.ink, &format!("range [{}, {}]", sig4(lo), sig4(hi)));
    let mut bundle = PlotBundle::new(prefix, theme);
    bundle.push("field".into(), svg.finish(), t.finish())?;
    Ok(bundle)
}

/// `"MAE v [lo, hi]  RMSE v [lo, hi]"` with four significant digits, or `"NA"`.
pub fn metric_annotation(m: &ModelMetrics) -> String {
    match &m.metrics {
        Some(e) => format!(
            "MAE {} [{}, {}]  RMSE {} [{}, {}]",
            sig4(e.mae.value),
            sig4(e.mae.lower),
            sig4(e.mae.upper),
            sig4(e.rmse.value),
            sig4(e.rmse.lower),
            sig4(e.rmse.upper)
        ),
        None => "NA".into(),
    }
}

/// Observed-versus-predicted scatter per model, and the map of held-out disks.
pub fn plot_sloo(result: &SlooResult, coords: &[Point2], rad: f64, prefix: &str, theme: &Theme) -> Result<PlotBundle, VizError> {
    let mut bundle = PlotBundle::new(prefix, theme);
    let mut values: Vec<f64> = result.iterations.iter().map(|it| it.observed).collect();
    values.extend(result.iterations.iter().flat_map(|it| it.outcomes.iter().filter_map(ModelOutcome::mean)));
    let lim = range_of(&values);
    let annotations = result.models.len() as f64 * 28.0;
    let height = theme.height + annotations;
    let f = Frame::new(theme.width, theme.height, lim, lim);
    let mut svg = Svg::new(theme.width, height, "spatial leave-one-out predictions");
    svg.begin_plot(&f, "predicted", "observed");
    svg.line("identity", (f.px(f.x.0), f.py(f.x.0)), (f.px(f.x.1), f.py(f.x.1)), &theme.muted, 1.0);
    let mut t = Table::new(&["model", "iteration", "observed", "predicted", "sd"]);
    for (m, name) in result.models.iter().enumerate() {
        let color = theme.series_color(m);
        for it in &result.iterations {
            let (mean, sd) = match &it.outcomes[m] {
                ModelOutcome::Predicted { mean, sd } => (Some(*mean), Some(*sd)),
                ModelOutcome::Failed(_) => (None, None),
            };
            if let Some(mean) = mean {
                svg.circle("mark", (f.px(mean), f.py(it.observed)), 2.5, "none", color);
            }
            t.row(&[Cell::Text(name.clone()), Cell::Int(it.iteration + 1), it.observed.into(), mean.into(), sd.into()]);
        }
    }
    svg.end_plot();
    for (m, metrics) in result.metrics.iter().enumerate() {
        let y = theme.height + 4.0 + 28.0 * m as f64;
        svg.text(10.0, y, "start", theme.series_color(m), &metrics.model);
        svg.text(22.0, y + 13.0, "start", theme.series_color(m), &metric_annotation(metrics));
    }
    bundle.push("obs_pred".into(), svg.finish(), t.finish())?;

    let (xr, yr) = extent(coords.iter().copied());
    let disk = |p: &Point2| [Point2::new(p.x - rad, p.y - rad), Point2::new(p.x + rad, p.y + rad)];
    let held: Vec<Point2> = result.iterations.iter().map(|it| it.coord).collect();
    let (hx, hy) = extent(held.iter().flat_map(disk));
    let f = Frame::equal_aspect(
        theme.width,
        theme.height,
        (xr.0.min(hx.0), xr.1.max(hx.1)),
        (yr.0.min(hy.0), yr.1.max(hy.1)),
    );
    let mut svg = Svg::new(theme.width, theme.height, &format!("held-out points, radius {}", sig4(rad)));
    svg.begin_plot(&f, "x", "y");
    let mut t = Table::new(&["kind", "label", "x", "y", "radius"]);
    let holdouts: Vec<usize> = result.iterations.iter().map(|it| it.holdout).collect();
    for (i, p) in coords.iter().enumerate() {
        if !holdouts.contains(&i) {
            svg.cross("mark", (f.px(p.x), f.py(p.y)), 2.5, &theme.ink);
            t.row(&[Cell::Text("point".into()), Cell::Int(i + 1), p.x.into(), p.y.into(), Cell::Na]);
        }
    }
    for it in &result.iterations {
        let c = (f.px(it.coord.x), f.py(it.coord.y));
        svg.circle("buffer", c, rad * f.sx, "none", &theme.accent);
        t.row(&[Cell::Text("holdout".into()), Cell::Int(it.iteration + 1), it.coord.x.into(), it.coord.y.into(), rad.into()]);
    }
    for it in &result.iterations {
        let c = (f.px(it.coord.x), f.py(it.coord.y));
        svg.circle("disk", c, 7.0, &theme.accent, "none");
        svg.text(c.0, c.1 + 3.5, "middle", "#ffffff", &(it.iteration + 1).to_string());
    }
    svg.end_plot();
    bundle.push("map".into(), svg.finish(), t.finish())?;
    Ok(bundle)
}
