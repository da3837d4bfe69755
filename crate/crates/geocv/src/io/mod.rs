//! Data ingestion, result files and synthetic data.

mod config;
mod data;
mod results;
mod synth;
mod wkt;

pub use config::{
    CiSetting, DataSection, MeshSection, ModelSection, NaPolicy, OutputSection, PriorSection, RadiusSetting,
    ReportSection, RunConfig, SlooSection,
};
pub use data::{load_dataset, DataOptions, LoadedData, Scaling};
pub use results::{
    read_calibration, read_fit, read_mesh, read_sloo, write_calibration, write_fit, write_mesh, write_sloo,
    SCHEMA_VERSION,
};
pub use synth::{synth_dataset, write_dataset_csv, Domain, SynthSpec, SynthTruth};
pub use wkt::{load_polygon, parse_polygon, Polygon};

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: line {line}, column `{column}`: cannot parse `{value}` as a number")]
    NonNumeric { path: PathBuf, line: u64, column: String, value: String },
    #[error("{path}: line {line}, column `{column}`: value is not finite")]
    NonFinite { path: PathBuf, line: u64, column: String },
    #[error("{path}: no data rows")]
    Empty { path: PathBuf },
    #[error("WKT parse error at offset {offset}: {message}")]
    Wkt { offset: usize, message: String },
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}: expected schema `{expected}`, found `{found}`")]
    Schema { path: PathBuf, expected: String, found: String },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Model(#[from] geocv_core::model::ModelError),
    #[error(transparent)]
    Mesh(#[from] geocv_core::mesh::MeshError),
    #[error("synthetic data: {0}")]
    Synth(String),
}

pub(crate) fn file_error(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> IoError {
    let path = path.into();
    move |source| IoError::File { path, source }
}
