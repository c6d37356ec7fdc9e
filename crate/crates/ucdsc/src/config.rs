//! JSON run and ablation configurations.
//!
//! Every key is optional except where noted; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ucdsc_core::data::{generate_blobs, SyntheticSpec};
use ucdsc_core::eval::ScoreMode;
use ucdsc_core::losses::LossWeights;
use ucdsc_core::network::{BackgroundSource, TrainConfig};

use crate::error::CliError;
use crate::formats::{load_csv, CsvDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic {
        #[serde(flatten)]
        spec: SyntheticSpec,
        /// Defaults to the root seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Csv {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BackgroundConfig {
    None,
    /// Fresh uniform noise per step; the range defaults to the global
    /// min/max of the dataset's features.
    Uniform {
        #[serde(default)]
        low: Option<f64>,
        #[serde(default)]
        high: Option<f64>,
    },
    /// Same format as the dataset CSV; the label column is ignored.
    Csv {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Checked against the dataset when given.
    #[serde(default)]
    pub total_classes: Option<usize>,
    pub num_known: usize,
    #[serde(default = "one")]
    pub num_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    /// Defaults to the number of known classes.
    #[serde(default)]
    pub feature_dim: Option<usize>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden: default_hidden(),
            feature_dim: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    /// Defaults to `batch_size`.
    #[serde(default)]
    pub background_per_batch: Option<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            batch_size: default_batch(),
            learning_rate: default_lr(),
            background_per_batch: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    #[serde(default = "default_background")]
    pub background: BackgroundConfig,
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub train: TrainingConfig,
    #[serde(default)]
    pub loss: LossWeights,
    #[serde(default = "default_expand")]
    pub expand_factor: f64,
    #[serde(default)]
    pub score_mode: ScoreMode,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}
fn default_hidden() -> Vec<usize> {
    vec![128, 64]
}
fn default_epochs() -> usize {
    100
}
fn default_batch() -> usize {
    512
}
fn default_lr() -> f64 {
    0.01
}
fn default_expand() -> f64 {
    100.0
}
fn default_background() -> BackgroundConfig {
    BackgroundConfig::Uniform { low: None, high: None }
}

/// Everything a run needs, loaded and validated.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub config: RunConfig,
    pub data: CsvDataset,
    pub background: BackgroundSource,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    /// Relative CSV paths are taken relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DatasetSource::Csv { path } = &mut self.dataset {
            fix(path);
        }
        if let BackgroundConfig::Csv { path } = &mut self.background {
            fix(path);
        }
    }

    /// Loads data and checks every precondition of the run; writes nothing.
    pub fn prepare(&self) -> Result<PreparedRun, CliError> {
        let data = match &self.dataset {
            DatasetSource::Synthetic { spec, seed } => {
                let dataset = generate_blobs(spec, seed.unwrap_or(self.seed)).map_err(CliError::config)?;
                CsvDataset {
                    dataset,
                    label_map: None,
                }
            }
            DatasetSource::Csv { path } => load_csv(path)?,
        };
        let total = data.dataset.total_classes;
        let p = &self.protocol;
        if let Some(expected) = p.total_classes {
            if expected != total {
                return Err(CliError::config(format!(
                    "protocol.total_classes is {expected} but the dataset has {total} classes"
                )));
            }
        }
        if p.num_known == 0 || p.num_known >= total {
            return Err(CliError::config(format!(
                "protocol.num_known must be in [1, {total}), got {}",
                p.num_known
            )));
        }
        if p.num_known < 2 {
            return Err(CliError::config("training needs at least two known classes"));
        }
        if p.num_trials == 0 {
            return Err(CliError::config("protocol.num_trials must be at least 1"));
        }

        let background = match &self.background {
            BackgroundConfig::None => BackgroundSource::None,
            BackgroundConfig::Uniform { low, high } => {
                let values = data.dataset.samples.as_slice();
                let lo = low.unwrap_or_else(|| values.iter().copied().fold(f64::INFINITY, f64::min));
                let hi = high.unwrap_or_else(|| values.iter().copied().fold(f64::NEG_INFINITY, f64::max));
                BackgroundSource::Uniform { low: lo, high: hi }
            }
            BackgroundConfig::Csv { path } => BackgroundSource::Pool(load_csv(path)?.dataset.samples),
        };

        let train = self.train_config(data.dataset.dim(), 0);
        train
            .validate(p.num_known, data.dataset.dim(), &background)
            .map_err(CliError::config)?;
        if self.loss.lambda_o > 0.0 && matches!(self.background, BackgroundConfig::None) {
            return Err(CliError::config("loss.lambda_o > 0 requires a background source"));
        }
        Ok(PreparedRun {
            config: self.clone(),
            data,
            background,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.network.feature_dim.unwrap_or(self.protocol.num_known)
    }

    pub fn layer_dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(&self.network.hidden);
        dims.push(self.feature_dim());
        dims
    }

    /// Training settings of trial `trial_index` (seed `root + trial_index`).
    pub fn train_config(&self, input_dim: usize, trial_index: usize) -> TrainConfig {
        TrainConfig {
            layer_dims: self.layer_dims(input_dim),
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            seed: self.seed.wrapping_add(trial_index as u64),
            weights: self.loss,
            expand_factor: self.expand_factor,
            background_per_batch: self.train.background_per_batch.unwrap_or(self.train.batch_size),
        }
    }
}

/// Value lists to sweep over; every other setting comes from `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationGrid {
    pub base: RunConfig,
    #[serde(default)]
    pub lambda_o: Option<Vec<f64>>,
    #[serde(default)]
    pub lambda_u: Option<Vec<f64>>,
    #[serde(default)]
    pub margin: Option<Vec<f64>>,
    #[serde(default)]
    pub expand_factor: Option<Vec<f64>>,
    #[serde(default)]
    pub batch_size: Option<Vec<usize>>,
    #[serde(default = "default_cap")]
    pub max_cells: usize,
}

fn default_cap() -> usize {
    256
}

/// One cell of the sweep: the axis values in column order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub values: Vec<(&'static str, f64)>,
    pub config: RunConfig,
}

impl AblationGrid {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    fn axes(&self) -> Vec<(&'static str, Vec<f64>)> {
        let mut axes = Vec::new();
        let mut push = |name: &'static str, v: &Option<Vec<f64>>| {
            if let Some(v) = v {
                axes.push((name, v.clone()));
            }
        };
        push("lambda_o", &self.lambda_o);
        push("lambda_u", &self.lambda_u);
        push("margin", &self.margin);
        push("expand_factor", &self.expand_factor);
        let batch = self
            .batch_size
            .as_ref()
            .map(|b| b.iter().map(|&x| x as f64).collect());
        push("batch_size", &batch);
        axes
    }

    /// Cartesian product in axis order (lambda_o, lambda_u, margin,
    /// expand_factor, batch_size), the last listed axis varying fastest.
    pub fn cells(&self) -> Result<Vec<GridCell>, CliError> {
        let axes = self.axes();
        if axes.is_empty() {
            return Err(CliError::config("ablation grid has no axes"));
        }
        if let Some((name, _)) = axes.iter().find(|(_, v)| v.is_empty()) {
            return Err(CliError::config(format!("ablation axis `{name}` is empty")));
        }
        let size = axes.iter().try_fold(1usize, |acc, (_, v)| acc.checked_mul(v.len()));
        match size {
            Some(n) if n <= self.max_cells => {}
            _ => {
                return Err(CliError::config(format!(
                    "ablation grid exceeds max_cells = {}",
                    self.max_cells
                )))
            }
        }

        let mut cells = vec![Vec::new()];
        for (name, values) in &axes {
            cells = cells
                .into_iter()
                .flat_map(|prefix: Vec<(&'static str, f64)>| {
                    values.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push((*name, v));
                        p
                    })
                })
                .collect();
        }
        cells
            .into_iter()
            .map(|values| {
                let mut config = self.base.clone();
                for &(name, v) in &values {
                    match name {
                        "lambda_o" => config.loss.lambda_o = v,
                        "lambda_u" => config.loss.lambda_u = v,
                        "margin" => config.loss.margin = v,
                        "expand_factor" => config.expand_factor = v,
                        "batch_size" => {
                            if v < 1.0 {
                                return Err(CliError::config("batch_size values must be at least 1"));
                            }
                            config.train.batch_size = v as usize;
                        }
                        _ => unreachable!("unknown axis {name}"),
                    }
                }
                Ok(GridCell { values, config })
            })
            .collect()
    }
}
