use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::Method;
use crate::classifier::{ClassifierConfig, ConvClassifierConfig};
use crate::ctes::TrainConfig;
use crate::datagen::{GpSimConfig, NoiseMode};
use crate::error::{Error, Result};
use crate::eval::MethodSettings;
use crate::forest::ForestConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    Multivariate,
    ScalarToMatrix,
    TabularRisk,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::Multivariate => "multivariate",
            Study::ScalarToMatrix => "scalar-to-matrix",
            Study::TabularRisk => "tabular-risk",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationBlock {
    pub samples_per_group: usize,
    pub group_count: usize,
    pub noise_std: f64,
    pub noise_mode: NoiseMode,
}

impl Default for SimulationBlock {
    fn default() -> Self {
        Self {
            samples_per_group: 200,
            group_count: 5,
            noise_std: 0.005,
            noise_mode: NoiseMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleBlock {
    pub k: usize,
    pub h: usize,
    pub classifier: ClassifierConfig,
}

impl Default for EnsembleBlock {
    fn default() -> Self {
        Self {
            k: 5,
            h: 2,
            classifier: ClassifierConfig::default(),
        }
    }
}

/// Everything a benchmark run needs. Every field has a default, so `{}` is a
/// valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub study: Study,
    /// Spread of the characteristics; multivariate study only.
    pub sigmas: Vec<f64>,
    /// Groups to identify, one experiment each.
    pub groups: Vec<usize>,
    pub trials: usize,
    pub replicates: usize,
    pub subsample_replicates: bool,
    /// Draw a fresh dataset for every trial instead of one per sigma.
    pub redraw_per_trial: bool,
    pub methods: Vec<Method>,
    pub simulation: SimulationBlock,
    pub gp: GpSimConfig,
    /// Tabular CSV with an `outcome` column for the risk study.
    pub dataset: Option<PathBuf>,
    pub train: TrainConfig,
    pub ensemble: EnsembleBlock,
    /// Validation forest for vector expressions and risk estimates.
    pub forest: ForestConfig,
    /// Validation classifier for image expressions.
    pub conv_classifier: ConvClassifierConfig,
    pub pls_components: Option<usize>,
    pub grnn_bandwidth: Option<f64>,
    /// Weights swept with the single-model trainer; empty disables the sweep.
    pub beta_grid: Vec<f64>,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            study: Study::Multivariate,
            sigmas: vec![0.01, 0.03, 0.05, 0.07, 0.09],
            groups: vec![2, 3, 4],
            trials: 5,
            replicates: 1,
            subsample_replicates: true,
            redraw_per_trial: true,
            methods: Method::ALL.to_vec(),
            simulation: SimulationBlock::default(),
            gp: GpSimConfig::default(),
            dataset: None,
            train: TrainConfig::default(),
            ensemble: EnsembleBlock::default(),
            forest: ForestConfig::default(),
            conv_classifier: ConvClassifierConfig::default(),
            pls_components: None,
            grnn_bandwidth: None,
            beta_grid: vec![0.5, 0.6, 0.7, 0.8, 0.9],
            out: PathBuf::from("results"),
            seed: 0,
        }
    }
}

fn field(path: &str, message: impl std::fmt::Display) -> Error {
    Error::Config(format!("{path}: {message}"))
}

fn inner(path: &str, e: Error) -> Error {
    match e {
        Error::Config(m) => field(path, m),
        other => other,
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(field("trials", "must be at least 1"));
        }
        if self.replicates == 0 {
            return Err(field("replicates", "must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(field("methods", "must name at least one method"));
        }
        if self.groups.is_empty() {
            return Err(field("groups", "must name at least one group"));
        }
        if self.study == Study::Multivariate {
            if self.sigmas.is_empty() {
                return Err(field("sigmas", "must hold at least one value"));
            }
            for (i, &s) in self.sigmas.iter().enumerate() {
                if !(s > 0.0 && s < 1.0) {
                    return Err(field(
                        &format!("sigmas[{i}]"),
                        format!("{s} is outside (0, 1)"),
                    ));
                }
            }
        }
        let group_count = match self.study {
            Study::Multivariate => Some(self.simulation.group_count),
            Study::ScalarToMatrix => Some(self.gp.categories),
            Study::TabularRisk => None,
        };
        if let Some(c) = group_count {
            if c < 2 {
                return Err(field("simulation.group_count", "need at least two groups"));
            }
            for (i, &g) in self.groups.iter().enumerate() {
                if g == 0 || g > c {
                    return Err(field(
                        &format!("groups[{i}]"),
                        format!("group {g} outside 1..={c}"),
                    ));
                }
            }
        }
        if self.simulation.samples_per_group < 2 {
            return Err(field("simulation.samples_per_group", "must be at least 2"));
        }
        if self.study == Study::TabularRisk && self.dataset.is_none() {
            return Err(field("dataset", "the tabular-risk study needs a CSV path"));
        }
        self.train.validate().map_err(|e| inner("train", e))?;
        if self.ensemble.h == 0 {
            return Err(field("ensemble.h", "must be at least 1"));
        }
        if self.ensemble.k <= 2 * self.ensemble.h {
            return Err(field(
                "ensemble.k",
                format!(
                    "k must be larger than 2h (k = {}, h = {})",
                    self.ensemble.k, self.ensemble.h
                ),
            ));
        }
        self.ensemble
            .classifier
            .validate()
            .map_err(|e| inner("ensemble.classifier", e))?;
        self.forest.validate().map_err(|e| inner("forest", e))?;
        ClassifierConfig::Conv(self.conv_classifier.clone())
            .validate()
            .map_err(|e| inner("conv_classifier", e))?;
        if self.pls_components == Some(0) {
            return Err(field("pls_components", "must be at least 1"));
        }
        if let Some(b) = self.grnn_bandwidth {
            if !(b > 0.0 && b.is_finite()) {
                return Err(field("grnn_bandwidth", "must be positive"));
            }
        }
        for (i, &b) in self.beta_grid.iter().enumerate() {
            if !(0.0..=1.0).contains(&b) {
                return Err(field(
                    &format!("beta_grid[{i}]"),
                    format!("{b} is outside [0, 1]"),
                ));
            }
        }
        Ok(())
    }

    pub fn method_settings(&self) -> MethodSettings {
        MethodSettings {
            train: self.train.clone(),
            k: self.ensemble.k,
            h: self.ensemble.h,
            inverse_classifier: self.ensemble.classifier.clone(),
            pls_components: self.pls_components,
            grnn_bandwidth: self.grnn_bandwidth,
        }
    }

    /// The validation classifier suited to the study's expressions.
    pub fn validation_classifier(&self) -> ClassifierConfig {
        match self.study {
            Study::ScalarToMatrix => ClassifierConfig::Conv(self.conv_classifier.clone()),
            _ => ClassifierConfig::Forest(self.forest.clone()),
        }
    }
}

/// Parses and validates JSON text. Syntax and type errors carry the line,
/// column and field path.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            line: inner.line(),
            column: inner.column(),
            message: if path == "." {
                inner.to_string()
            } else {
                format!("{path}: {inner}")
            },
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config_str(&std::fs::read_to_string(path)?)
}
