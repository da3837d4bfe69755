use super::{file_error, DataOptions, IoError};
use geocv_core::formula::{Family, ModelSpec};
use geocv_core::mesh::MeshConfig;
use geocv_core::model::PriorSettings;
use geocv_core::sloocv::{CiMethod, Radius, SlooConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NaPolicy {
    /// Missing covariate cells are an error.
    #[default]
    Error,
    /// Missing covariate cells become 0.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    pub x: String,
    pub y: String,
    #[serde(default)]
    pub scale: bool,
    #[serde(default)]
    pub na_covariates: NaPolicy,
    #[serde(default)]
    pub constant_columns: Vec<String>,
    /// Optional WKT polygon drawn on field maps, in raw coordinates.
    pub polygon: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub formulas: Vec<String>,
    /// One family per formula, or a single family for all of them.
    #[serde(default = "default_families")]
    pub families: Vec<String>,
}

fn default_families() -> Vec<String> {
    vec!["normal".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub max_edge_inner: f64,
    pub max_edge_outer: f64,
    #[serde(default)]
    pub cutoff: f64,
    /// Ring width around the data hull; defaults to 0.3 × hull diameter.
    pub extension: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RadiusSetting {
    Value(f64),
    /// Must be `"auto"`.
    Named(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiSetting {
    #[default]
    Normal,
    Bootstrap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlooSection {
    pub ss: usize,
    pub rad: RadiusSetting,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub seed: u64,
    #[serde(default)]
    pub ci: CiSetting,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_resamples() -> usize {
    1000
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    /// Precision of the Gaussian priors on fixed effects.
    pub fixed_precision: Option<f64>,
    /// Prior sd on the log-scale hyperparameters.
    pub hyper_sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    #[serde(default = "default_pit")]
    pub pit: String,
    #[serde(default = "default_binwidth")]
    pub binwidth: f64,
    #[serde(default = "default_grid")]
    pub grid: [usize; 2],
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection { pit: default_pit(), binwidth: default_binwidth(), grid: default_grid() }
    }
}

fn default_pit() -> String {
    "plug-in".into()
}

fn default_binwidth() -> f64 {
    0.1
}

fn default_grid() -> [usize; 2] {
    [100, 100]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

/// Whole-run configuration, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub model: ModelSection,
    pub mesh: MeshSection,
    pub sloo: Option<SlooSection>,
    #[serde(default)]
    pub priors: PriorSection,
    #[serde(default)]
    pub report: ReportSection,
    pub output: OutputSection,
}

impl RunConfig {
    /// Parses and validates; relative paths resolve against the config file's directory.
    pub fn from_toml(text: &str, path: &Path) -> Result<RunConfig, IoError> {
        let err = |message: String| IoError::Config { path: path.into(), message };
        let mut config: RunConfig = toml::from_str(text).map_err(|e| err(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &Path| if p.is_relative() { base.join(p) } else { p.to_path_buf() };
        config.data.path = resolve(&config.data.path);
        config.data.polygon = config.data.polygon.as_deref().map(resolve);
        config.output.dir = resolve(&config.output.dir);
        config.models().map_err(err)?;
        config.mesh_config().validate().map_err(|e| err(e.to_string()))?;
        if let Some(s) = &config.sloo {
            if let RadiusSetting::Named(name) = &s.rad {
                if name != "auto" {
                    return Err(err(format!("sloo.rad must be a number or \"auto\", got \"{name}\"")));
                }
            }
        }
        let positive = |v: Option<f64>| v.is_none_or(|v| v > 0.0 && v.is_finite());
        if !positive(config.priors.fixed_precision) || !positive(config.priors.hyper_sd) {
            return Err(err("prior settings must be positive".into()));
        }
        if !(config.report.binwidth > 0.0 && config.report.binwidth <= 1.0) {
            return Err(err(format!("report.binwidth must be in (0, 1], got {}", config.report.binwidth)));
        }
        if config.report.pit.parse::<geocv_core::diagnostics::PitVariant>().is_err() {
            return Err(err(format!("report.pit must be \"plug-in\" or \"loo\", got \"{}\"", config.report.pit)));
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<RunConfig, IoError> {
        let text = std::fs::read_to_string(path).map_err(file_error(path))?;
        Self::from_toml(&text, path)
    }

    /// Formulas paired with families; a single family broadcasts.
    pub fn models(&self) -> Result<Vec<ModelSpec>, String> {
        let m = &self.model;
        if m.formulas.is_empty() {
            return Err("model.formulas is empty".into());
        }
        if m.families.len() != 1 && m.families.len() != m.formulas.len() {
            return Err(format!("{} families for {} formulas", m.families.len(), m.formulas.len()));
        }
        m.formulas
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let spec: ModelSpec = f.parse().map_err(|e| format!("formula {}: {e}", i + 1))?;
                let fam = &m.families[if m.families.len() == 1 { 0 } else { i }];
                let family: Family = fam.parse().map_err(|e| format!("family {}: {e}", i + 1))?;
                Ok(spec.with_family(family))
            })
            .collect()
    }

    pub fn prior_settings(&self) -> PriorSettings {
        PriorSettings { fixed_precision: self.priors.fixed_precision, hyper_sd: self.priors.hyper_sd }
    }

    pub fn mesh_config(&self) -> MeshConfig {
        let m = &self.mesh;
        let c = MeshConfig::new(m.max_edge_inner, m.max_edge_outer, m.cutoff);
        match m.extension {
            Some(e) => c.with_extension(e),
            None => c,
        }
    }

    pub fn sloo_config(&self) -> Result<SlooConfig, String> {
        let s = self.sloo.as_ref().ok_or("config has no [sloo] section")?;
        let rad = match &s.rad {
            RadiusSetting::Value(v) => Radius::Fixed(*v),
            RadiusSetting::Named(_) => Radius::Auto,
        };
        let mut config = SlooConfig::new(self.models()?, s.ss, rad, s.alpha, s.seed);
        config.priors = self.prior_settings();
        config.ci = match s.ci {
            CiSetting::Normal => CiMethod::Normal,
            CiSetting::Bootstrap => CiMethod::Bootstrap { resamples: s.bootstrap_resamples },
        };
        Ok(config)
    }

    /// Columns to load: every covariate named by a formula that is not a constant column.
    pub fn data_options(&self) -> Result<DataOptions, String> {
        let models = self.models()?;
        let response = models[0].response.clone();
        if let Some(m) = models.iter().find(|m| m.response != response) {
            return Err(format!("all formulas must share one response, found `{}` and `{}`", response, m.response));
        }
        let mut covariates: Vec<String> = Vec::new();
        for m in &models {
            for c in &m.covariates {
                if !covariates.contains(c) && !self.data.constant_columns.contains(c) {
                    covariates.push(c.clone());
                }
            }
        }
        Ok(DataOptions {
            x: self.data.x.clone(),
            y: self.data.y.clone(),
            response,
            covariates,
            scale: self.data.scale,
            na_covariates: self.data.na_covariates,
            constant_columns: self.data.constant_columns.clone(),
        })
    }
}
