use super::{IoError, NaPolicy};
use geocv_core::mesh::Point2;
use geocv_core::model::Dataset;
use std::path::Path;

/// Which columns to read and how to clean them.
#[derive(Debug, Clone, PartialEq)]
pub struct DataOptions {
    pub x: String,
    pub y: String,
    pub response: String,
    /// Covariate columns, in this order.
    pub covariates: Vec<String>,
    /// Standardize each coordinate axis.
    pub scale: bool,
    pub na_covariates: NaPolicy,
    /// Extra all-ones columns, e.g. an explicit intercept term.
    pub constant_columns: Vec<String>,
}

impl DataOptions {
    pub fn new(x: &str, y: &str, response: &str) -> Self {
        DataOptions {
            x: x.into(),
            y: y.into(),
            response: response.into(),
            covariates: Vec::new(),
            scale: false,
            na_covariates: NaPolicy::Error,
            constant_columns: Vec::new(),
        }
    }
}

/// Per-axis centring and scale: `scaled = (raw − center) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub center: [f64; 2],
    pub scale: [f64; 2],
}

impl Scaling {
    pub fn identity() -> Self {
        Scaling { center: [0.0; 2], scale: [1.0; 2] }
    }

    /// Mean and sample sd (n − 1) of each axis; `None` when either sd is zero or
    /// there is a single point.
    pub fn fit(points: &[Point2]) -> Option<Scaling> {
        let n = points.len();
        if n < 2 {
            return None;
        }
        let stats = |v: Vec<f64>| {
            let mean = v.iter().sum::<f64>() / n as f64;
            let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
            (mean, var.sqrt())
        };
        let (mx, sx) = stats(points.iter().map(|p| p.x).collect());
        let (my, sy) = stats(points.iter().map(|p| p.y).collect());
        (sx > 0.0 && sy > 0.0).then_some(Scaling { center: [mx, my], scale: [sx, sy] })
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        Point2::new((p.x - self.center[0]) / self.scale[0], (p.y - self.center[1]) / self.scale[1])
    }

    pub fn invert(&self, p: Point2) -> Point2 {
        Point2::new(p.x * self.scale[0] + self.center[0], p.y * self.scale[1] + self.center[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedData {
    pub dataset: Dataset,
    /// Raw coordinates before scaling.
    pub raw_coords: Vec<Point2>,
    /// Set when scaling was requested and possible.
    pub scaling: Option<Scaling>,
    /// Covariate cells replaced under [`NaPolicy::Zero`], as `(line, column)`.
    pub replaced_na: Vec<(u64, String)>,
}

fn parse_cell(path: &Path, line: u64, column: &str, raw: &str) -> Result<f64, IoError> {
    let value: f64 = raw.trim().parse().map_err(|_| IoError::NonNumeric {
        path: path.into(),
        line,
        column: column.into(),
        value: raw.into(),
    })?;
    if !value.is_finite() {
        return Err(IoError::NonFinite { path: path.into(), line, column: column.into() });
    }
    Ok(value)
}

fn is_na(raw: &str) -> bool {
    matches!(raw.trim(), "NA" | "")
}

/// Reads a delimited file with a header row.
///
/// Coordinates and the response must be numeric everywhere; missing covariate cells
/// (`NA` or empty) follow `options.na_covariates`. Numbers are parsed with `.` as the
/// decimal point regardless of locale.
pub fn load_dataset(path: &Path, options: &DataOptions) -> Result<LoadedData, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| IoError::Csv { path: path.into(), source })?;
    let headers = reader.headers().map_err(|source| IoError::Csv { path: path.into(), source })?.clone();
    let index = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IoError::MissingColumn { path: path.into(), column: name.into() })
    };
    let (ix, iy, ir) = (index(&options.x)?, index(&options.y)?, index(&options.response)?);
    let icov: Vec<usize> = options.covariates.iter().map(|c| index(c)).collect::<Result<_, _>>()?;

    let mut raw_coords = Vec::new();
    let mut response = Vec::new();
    let mut covs: Vec<Vec<f64>> = vec![Vec::new(); icov.len()];
    let mut replaced_na = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| IoError::Csv { path: path.into(), source })?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |i: usize| record.get(i).unwrap_or("");
        let x = parse_cell(path, line, &options.x, cell(ix))?;
        let y = parse_cell(path, line, &options.y, cell(iy))?;
        raw_coords.push(Point2::new(x, y));
        response.push(parse_cell(path, line, &options.response, cell(ir))?);
        for (k, &i) in icov.iter().enumerate() {
            let name = &options.covariates[k];
            let v = if is_na(cell(i)) && options.na_covariates == NaPolicy::Zero {
                replaced_na.push((line, name.clone()));
                0.0
            } else {
                parse_cell(path, line, name, cell(i))?
            };
            covs[k].push(v);
        }
    }
    if raw_coords.is_empty() {
        return Err(IoError::Empty { path: path.into() });
    }
    let scaling = if options.scale { Scaling::fit(&raw_coords) } else { None };
    let coords = match &scaling {
        Some(s) => raw_coords.iter().map(|&p| s.apply(p)).collect(),
        None => raw_coords.clone(),
    };
    let n = raw_coords.len();
    let mut covariates: Vec<(String, Vec<f64>)> = options.covariates.iter().cloned().zip(covs).collect();
    for name in &options.constant_columns {
        if !covariates.iter().any(|(c, _)| c == name) {
            covariates.push((name.clone(), vec![1.0; n]));
        }
    }
    let dataset = Dataset::new(coords, response, covariates)?;
    Ok(LoadedData { dataset, raw_coords, scaling, replaced_na })
}
