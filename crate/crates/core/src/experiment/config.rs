use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{DataOptions, LabelMap, SyntheticSpec, Vocabulary};
use crate::error::{Error, Result};
use crate::metrics::Weighting;
use crate::model::{ConvSpec, LayerGroup, LstmSpec, ModelConfig, Task, DEFAULT_FILTERS, DEFAULT_HIDDEN, DEFAULT_KERNEL};
use crate::pipeline::{Regime, StagesConfig, TrainingConfig};

/// Network architecture; class counts come from the data vocabulary and the
/// window length from the data options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub conv_layers: Vec<ConvSpec>,
    pub lstm_layers: Vec<LstmSpec>,
    /// Layer name to group; the default partition when absent.
    pub group_partition: Option<BTreeMap<String, LayerGroup>>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            conv_layers: vec![ConvSpec { filters: DEFAULT_FILTERS, kernel: DEFAULT_KERNEL }; 4],
            lstm_layers: vec![LstmSpec { hidden: DEFAULT_HIDDEN }; 2],
            group_partition: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    /// Files or directories of `*.csv`; relative paths resolve against the
    /// config file's directory.
    pub paths: Vec<PathBuf>,
    #[serde(default = "default_hz")]
    pub native_hz: f64,
    #[serde(default)]
    pub label_maps: LabelMap,
    /// Fixed class order per task; observed labels when absent.
    #[serde(default)]
    pub classes: Option<BTreeMap<Task, Vec<String>>>,
}

fn default_hz() -> f64 {
    10.0
}

impl CsvSource {
    pub fn vocabulary(&self) -> Option<Vocabulary> {
        self.classes.clone().map(|classes| Vocabulary { classes })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Csv(CsvSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(default)]
    pub options: DataOptions,
    pub source: DataSource,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub weighting: Weighting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub model: ModelSection,
    pub data: DataSection,
    pub regimes: Vec<Regime>,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub stages: StagesConfig,
    #[serde(default)]
    pub report: ReportSection,
}

impl ExperimentConfig {
    /// Parses and validates a config document.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves relative CSV paths against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let DataSource::Csv(csv) = &mut cfg.data.source {
            let base = path.parent().unwrap_or(Path::new("."));
            for p in &mut csv.paths {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.data.options.validate()?;
        self.training.validate()?;
        if self.regimes.is_empty() {
            return Err(Error::Config("regimes must not be empty".into()));
        }
        match &self.data.source {
            DataSource::Synthetic(spec) => spec.validate().map_err(|e| Error::Config(e.to_string()))?,
            DataSource::Csv(csv) => {
                if csv.paths.is_empty() {
                    return Err(Error::Config("data.source.csv.paths must not be empty".into()));
                }
                if !(csv.native_hz.is_finite() && csv.native_hz > 0.0) {
                    return Err(Error::Config("native_hz must be positive".into()));
                }
            }
        }
        if self.model.conv_layers.is_empty() || self.model.lstm_layers.is_empty() {
            return Err(Error::Config("model needs at least one conv and one LSTM layer".into()));
        }
        Ok(())
    }

    /// Model config with heads sized by `vocab`.
    pub fn model_config(&self, vocab: &Vocabulary) -> Result<ModelConfig> {
        let heads = vocab.heads();
        if heads.is_empty() {
            return Err(Error::Config("no task has at least two classes".into()));
        }
        let mut cfg = ModelConfig::with_default_partition(
            self.model.conv_layers.clone(),
            self.model.lstm_layers.clone(),
            heads,
            self.data.options.window_length,
            3,
        );
        if let Some(p) = &self.model.group_partition {
            cfg.group_partition = p.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn digest_hex(&self) -> String {
        super::sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}
