//! JSON configuration files for each subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use tiny_tsm::harness::holdout::HoldoutKind;
use tiny_tsm::inference::InferenceConfig;
use tiny_tsm::model::ModelConfig;
use tiny_tsm::synthts::{AugmentationConfig, BatchParamConfig};
use tiny_tsm::training::{Objective, TrainConfig};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

/// Reads and validates a config file, reporting schema errors with a JSON
/// pointer to the offending field.
pub fn load<T: DeserializeOwned + Versioned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let cfg: T = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = pointer(e.path());
        CliError::new("invalid_config", e.into_inner().to_string()).at(pointer)
    })?;
    if cfg.version() != SCHEMA_VERSION {
        return Err(CliError::new(
            "invalid_config",
            format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", cfg.version()),
        )
        .at("/schema_version".into()));
    }
    Ok(cfg)
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

pub trait Versioned {
    fn version(&self) -> u32;
}

macro_rules! versioned {
    ($($t:ty),*) => {
        $(impl Versioned for $t {
            fn version(&self) -> u32 {
                self.schema_version
            }
        })*
    };
}

versioned!(GenerateConfig, TrainFile, ForecastFile, EvaluateFile, ModelFile);

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub n_series: usize,
    #[serde(default)]
    pub batch: BatchParamConfig,
    #[serde(default)]
    pub augmentation: AugmentationConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Preset(Preset),
    Custom(ModelConfig),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Toy,
    Full,
}

impl ModelChoice {
    pub fn resolve(&self) -> ModelConfig {
        match self {
            ModelChoice::Preset(Preset::Toy) => ModelConfig::toy(),
            ModelChoice::Preset(Preset::Full) => ModelConfig::full(),
            ModelChoice::Custom(c) => c.clone(),
        }
    }
}

impl Default for ModelChoice {
    fn default() -> Self {
        ModelChoice::Preset(Preset::Toy)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic {
        #[serde(default)]
        batch: BatchParamConfig,
        #[serde(default)]
        augmentation: AugmentationConfig,
    },
    /// Series are drawn uniformly from the listed dataset files.
    Files { paths: Vec<PathBuf> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub model: ModelChoice,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "dense")]
    pub objective: Objective,
    pub data: DataSource,
    /// Warm start from an existing checkpoint.
    #[serde(default)]
    pub init_checkpoint: Option<PathBuf>,
}

fn dense() -> Objective {
    Objective::DenseNextToken
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastFile {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub inference: InferenceConfig,
    /// CSV with the known-future channels' next values, one column per channel.
    #[serde(default)]
    pub future: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSource {
    Holdout { kind: HoldoutKind, n: usize, context: usize, horizon: usize },
    /// The last `horizon` steps of every series are held out.
    Dataset { path: PathBuf, context: usize, horizon: usize, #[serde(default)] season: Option<usize> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateFile {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub tasks: Vec<TaskSource>,
    #[serde(default)]
    pub inference: InferenceConfig,
    /// Evaluate the seasonal-naive baseline against itself instead of a model.
    #[serde(default)]
    pub baseline_only: bool,
    /// Loss-curve CSVs (as written by `train`) to plot next to the report.
    #[serde(default)]
    pub loss_curves: Vec<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub model: ModelChoice,
}
