//! Deterministic SVG figures, each with a CSV of the plotted data.
//!
//! Every data group carries its affine map in `data-sx`, `data-ox`, `data-sy` and
//! `data-oy` attributes (`px = ox + sx·x`, `py = oy + sy·y`).

mod spatial;
mod summaries;
mod svg;

pub use spatial::{metric_annotation, plot_field, plot_mesh, plot_sloo};
pub use summaries::{plot_model_summaries, plot_residuals, Which};
pub use svg::Frame;

use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VizError {
    #[error("binwidth must be in (0, 1], got {0}")]
    InvalidBinwidth(f64),
    #[error("unknown panel `{0}`; expected fixed, hyper, random or predictor")]
    UnknownPanel(String),
    #[error("duplicate panel name `{0}`")]
    DuplicatePanel(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theme {
    pub width: f64,
    pub height: f64,
    pub ink: String,
    pub prior: String,
    pub accent: String,
    pub muted: String,
    /// One colour per model in multi-model panels.
    pub series: Vec<String>,
    pub binwidth: f64,
}

impl Default for Theme {
    fn default() -> Self {
        Theme {
            width: 480.0,
            height: 360.0,
            ink: "#000000".into(),
            prior: "#1f5fbf".into(),
            accent: "#d62728".into(),
            muted: "#9a9a9a".into(),
            series: ["#000000", "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd"].map(String::from).to_vec(),
            binwidth: 0.1,
        }
    }
}

impl Theme {
    pub(crate) fn series_color(&self, k: usize) -> &str {
        &self.series[k % self.series.len()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub name: String,
    pub svg: String,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotBundle {
    pub prefix: String,
    pub theme: Theme,
    pub panels: Vec<Panel>,
}

impl PlotBundle {
    pub(crate) fn new(prefix: &str, theme: &Theme) -> Self {
        PlotBundle { prefix: prefix.into(), theme: theme.clone(), panels: Vec::new() }
    }

    pub(crate) fn push(&mut self, name: String, svg: String, csv: String) -> Result<(), VizError> {
        if self.panels.iter().any(|p| p.name == name) {
            return Err(VizError::DuplicatePanel(name));
        }
        self.panels.push(Panel { name, svg, csv });
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.panels.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn panel(&self, name: &str) -> Option<&Panel> {
        self.panels.iter().find(|p| p.name == name)
    }

    pub fn file_stem(&self, panel: &Panel) -> String {
        format!("{}_{}", self.prefix, panel.name)
    }

    /// Writes `<prefix>_<panel>.svg` and `.csv` into `dir`; returns the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, VizError> {
        let mut written = Vec::new();
        for p in &self.panels {
            let stem = self.file_stem(p);
            for (ext, body) in [("svg", &p.svg), ("csv", &p.csv)] {
                let path = dir.join(format!("{stem}.{ext}"));
                std::fs::write(&path, body).map_err(|source| VizError::Io { path: path.clone(), source })?;
                written.push(path);
            }
        }
        Ok(written)
    }
}

/// Four significant digits, switching to exponent notation outside `[1e-4, 1e6)`.
pub fn sig4(v: f64) -> String {
    if !v.is_finite() {
        return "NA".into();
    }
    if v == 0.0 {
        return "0.000".into();
    }
    let e = format!("{v:.3e}");
    let exp: i32 = e.split_once('e').and_then(|(_, x)| x.parse().ok()).unwrap_or(0);
    if (-4..6).contains(&exp) {
        format!("{:.*}", (3 - exp).max(0) as usize, v)
    } else {
        e
    }
}

/// File-name-safe panel suffix.
pub(crate) fn slug(name: &str) -> String {
    name.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_ascii_lowercase)
        .collect::<Vec<_>>()
        .join("_")
}

/// Minimal CSV text; numbers print in shortest round-trip form.
pub(crate) struct Table {
    out: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Table {
        Table { out: header.join(",") + "\n" }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        let cells: Vec<String> = cells
            .iter()
            .map(|c| match c {
                Cell::Num(v) if v.is_finite() => format!("{v}"),
                Cell::Num(_) | Cell::Na => "NA".into(),
                Cell::Int(i) => i.to_string(),
                Cell::Text(t) if t.contains([',', '"', '\n']) => format!("\"{}\"", t.replace('"', "\"\"")),
                Cell::Text(t) => t.clone(),
            })
            .collect();
        self.out.push_str(&cells.join(","));
        self.out.push('\n');
    }

    pub fn finish(self) -> String {
        self.out
    }
}

pub(crate) enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
    Na,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Na, Cell::Num)
    }
}
