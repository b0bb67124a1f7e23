use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corruption::{DelaySpec, NoiseSpec};
use crate::error::{Error, Result};
use crate::seqmodel::ModelConfig;
use crate::synthgen::{self, Coupling, GeneratorSpec};
use crate::workflow::{load_dataset, Dataset, MaskConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Experiment {
    #[serde(rename = "E1", alias = "E1_one_element")]
    OneElement,
    #[serde(rename = "E2", alias = "E2_two_element")]
    TwoElement,
    #[serde(rename = "E3", alias = "E3_duration")]
    Duration,
    #[serde(rename = "E4", alias = "E4_noise")]
    Noise,
    #[serde(rename = "E5", alias = "E5_delay")]
    Delay,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::OneElement => "E1",
            Experiment::TwoElement => "E2",
            Experiment::Duration => "E3",
            Experiment::Noise => "E4",
            Experiment::Delay => "E5",
        }
    }

    /// Whether scoring uses a model-free VIS baseline alongside trained configs.
    pub fn has_baseline(self) -> bool {
        matches!(self, Experiment::Noise | Experiment::Delay)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let head = s.split('_').next().unwrap_or_default().to_ascii_uppercase();
        Ok(match head.as_str() {
            "E1" => Experiment::OneElement,
            "E2" => Experiment::TwoElement,
            "E3" => Experiment::Duration,
            "E4" => Experiment::Noise,
            "E5" => Experiment::Delay,
            _ => return Err(Error::InvalidArgument(format!("unknown experiment `{s}`"))),
        })
    }
}

/// Model hyperparameters to change from the defaults (2 x 256, dropout
/// 0.2, 50 epochs, lr 0.001, batch 128).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOverrides {
    pub layers: Option<usize>,
    pub hidden: Option<usize>,
    pub dropout_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
}

impl ModelOverrides {
    pub fn apply(&self, mut cfg: ModelConfig) -> ModelConfig {
        cfg.layers = self.layers.unwrap_or(cfg.layers);
        cfg.hidden = self.hidden.unwrap_or(cfg.hidden);
        cfg.dropout_rate = self.dropout_rate.unwrap_or(cfg.dropout_rate);
        cfg.epochs = self.epochs.unwrap_or(cfg.epochs);
        cfg.learning_rate = self.learning_rate.unwrap_or(cfg.learning_rate);
        cfg.batch_size = self.batch_size.unwrap_or(cfg.batch_size);
        cfg
    }
}

/// Changes to a generator preset before the dataset is synthesized.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorOverrides {
    pub n_interventions: Option<usize>,
    pub activities_mean: Option<f64>,
    pub activities_sd: Option<f64>,
    pub coupling: Option<Coupling>,
    pub seed: Option<u64>,
}

impl GeneratorOverrides {
    pub fn apply(&self, mut spec: GeneratorSpec) -> GeneratorSpec {
        spec.n_interventions = self.n_interventions.unwrap_or(spec.n_interventions);
        spec.activities_mean = self.activities_mean.unwrap_or(spec.activities_mean);
        spec.activities_sd = self.activities_sd.unwrap_or(spec.activities_sd);
        spec.coupling = self.coupling.unwrap_or(spec.coupling);
        spec.seed = self.seed.unwrap_or(spec.seed);
        spec
    }
}

fn default_runs() -> usize {
    3
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

/// One experiment, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Generator preset name, or a path to a dataset manifest.
    pub dataset: String,
    /// Empty means the experiment's default set.
    #[serde(default)]
    pub configurations: Vec<MaskConfig>,
    pub window_n: Option<usize>,
    #[serde(default)]
    pub model: ModelOverrides,
    #[serde(default)]
    pub noise: Vec<NoiseSpec>,
    #[serde(default)]
    pub delay: Vec<DelaySpec>,
    #[serde(default = "default_runs")]
    pub runs_per_fold: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Worker threads; all available cores when absent.
    pub workers: Option<usize>,
    /// Append the duration feature to every input tuple. Defaults to on
    /// for E3 and E5.
    pub duration_feature: Option<bool>,
    /// Only run the first `max_folds` folds (in intervention id order).
    pub max_folds: Option<usize>,
    #[serde(default)]
    pub save_models: bool,
    #[serde(default)]
    pub reuse_models: bool,
    pub model_dir: Option<PathBuf>,
    pub generator: Option<GeneratorOverrides>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, dataset: &str) -> Self {
        ExperimentConfig {
            experiment,
            dataset: dataset.to_owned(),
            configurations: Vec::new(),
            window_n: None,
            model: ModelOverrides::default(),
            noise: Vec::new(),
            delay: Vec::new(),
            runs_per_fold: default_runs(),
            seed: 0,
            output_dir: default_output(),
            workers: None,
            duration_feature: None,
            max_folds: None,
            save_models: false,
            reuse_models: false,
            model_dir: None,
            generator: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs_per_fold == 0 {
            return Err(Error::Config("runs_per_fold must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.max_folds == Some(0) {
            return Err(Error::Config("max_folds must be at least 1".into()));
        }
        if self.configurations.iter().any(|m| *m == MaskConfig::HIDDEN) {
            return Err(Error::Config("a configuration must show at least one position".into()));
        }
        match self.experiment {
            Experiment::Noise if self.noise.is_empty() => {
                return Err(Error::Config("E4 needs at least one [[noise]] entry".into()))
            }
            Experiment::Delay if self.delay.is_empty() => {
                return Err(Error::Config("E5 needs at least one [[delay]] entry".into()))
            }
            _ => {}
        }
        for n in &self.noise {
            n.validate()?;
        }
        for d in &self.delay {
            d.validate()?;
        }
        if (self.save_models || self.reuse_models) && self.model_dir.is_none() {
            return Err(Error::Config("save_models and reuse_models need model_dir".into()));
        }
        self.model_config().validate()
    }

    /// Configurations to score, in report order. E4 and E5 always include
    /// the VIS baseline.
    pub fn configurations(&self) -> Vec<MaskConfig> {
        let names: &[&str] = match self.experiment {
            Experiment::OneElement => &["V", "I", "S"],
            Experiment::TwoElement => &["VI", "VS", "IS"],
            _ => &["V", "I", "S", "VI", "VS", "IS"],
        };
        let mut out = if self.configurations.is_empty() {
            names.iter().map(|n| n.parse().unwrap()).collect()
        } else {
            self.configurations.clone()
        };
        if self.experiment.has_baseline() && !out.contains(&MaskConfig::VIS) {
            out.push(MaskConfig::VIS);
        }
        out
    }

    pub fn window_n(&self) -> usize {
        if let Some(n) = self.window_n {
            return n;
        }
        if self.experiment.has_baseline() {
            return 5;
        }
        let name = Path::new(&self.dataset)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or(&self.dataset)
            .to_ascii_uppercase();
        if name.starts_with("ACDF") {
            50
        } else if name.starts_with("LDH") || name.starts_with("PA") {
            20
        } else {
            5
        }
    }

    pub fn duration_feature(&self) -> bool {
        self.duration_feature
            .unwrap_or(matches!(self.experiment, Experiment::Duration | Experiment::Delay))
    }

    /// Hyperparameters with overrides applied; input and class sizes are
    /// filled in per fold.
    pub fn model_config(&self) -> ModelConfig {
        let mut cfg = self.model.apply(ModelConfig::default());
        cfg.window_n = self.window_n();
        cfg.duration_input = self.duration_feature();
        cfg
    }

    /// Generates the preset or loads the manifest named by `dataset`.
    pub fn resolve_dataset(&self) -> Result<Dataset> {
        if synthgen::PRESETS.contains(&self.dataset.as_str()) {
            let mut spec = synthgen::preset(&self.dataset)?;
            if let Some(g) = &self.generator {
                spec = g.apply(spec);
            }
            return synthgen::generate_dataset(&spec);
        }
        let path = Path::new(&self.dataset);
        if path.exists() {
            if self.generator.is_some() {
                return Err(Error::Config("generator overrides only apply to presets".into()));
            }
            let manifest = if path.is_dir() { path.join("manifest.json") } else { path.to_path_buf() };
            return load_dataset(&manifest);
        }
        Err(Error::UnknownPreset(self.dataset.clone()))
    }
}
