//! Stacked LSTM classifier over windows of encoded activity tuples.
//!
//! The network reads a window of `window_n + 1` feature vectors, runs
//! them through `layers` LSTM layers (input, forget and output gates,
//! tanh cell candidate and output activation, no peepholes), projects the
//! last hidden state of the top layer onto the joint activity classes and
//! applies a softmax. Training is full backpropagation through time over
//! the window with inverted dropout on non-recurrent connections and Adam.
//!
//! All parameters live in one flat `Vec<f64>`; [`Layout`] maps matrices
//! onto it. Gradients share the layout, which keeps Adam and finite
//! difference checks index-based.

mod adam;
mod classes;
mod gradcheck;
mod lstm;
mod train;

use std::fs;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Rng;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use classes::ClassSet;
pub use gradcheck::{gradient_check, gradient_check_with, Fault, GradCheckOptions};
pub use lstm::{backward, forward, loss, predict, ForwardCache, Prediction, Workspace};
pub(crate) use lstm::predict_with;
pub use train::{train, train_with_history, Sample, TrainHistory};

/// Smallest probability used inside the log of the cross-entropy.
pub const PROB_FLOOR: f64 = 1e-12;

const ARTIFACT_VERSION: u32 = 1;

/// Recurrent cell used by every layer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellVariant {
    #[default]
    Lstm,
    /// Gates held open and identity activations: `c = c_prev + z_g`, `h = c`.
    /// Only used to validate gradient plumbing on a linear map.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub layers: usize,
    pub hidden: usize,
    pub dropout_rate: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub window_n: usize,
    pub input_dim: usize,
    pub n_classes: usize,
    /// The last input component is a duration in seconds and is standardized.
    pub duration_input: bool,
    pub cell: CellVariant,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            layers: 2,
            hidden: 256,
            dropout_rate: 0.2,
            epochs: 50,
            learning_rate: 0.001,
            batch_size: 128,
            window_n: 5,
            input_dim: 1,
            n_classes: 1,
            duration_input: false,
            cell: CellVariant::Lstm,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("layers", self.layers),
            ("hidden", self.hidden),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("input_dim", self.input_dim),
            ("n_classes", self.n_classes),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("model {name} must be at least 1")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate {} is outside [0, 1)",
                self.dropout_rate
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.window_n + 1
    }
}

/// Offsets of one layer's parameters in the flat vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerLayout {
    pub in_dim: usize,
    /// `4H x (in_dim + H)` row-major; gate row blocks are input, forget, output, candidate.
    pub w: usize,
    pub b: usize,
}

impl LayerLayout {
    pub fn row_len(&self, hidden: usize) -> usize {
        self.in_dim + hidden
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub hidden: usize,
    pub layers: Vec<LayerLayout>,
    /// `C x H` projection and `C` bias.
    pub out_w: usize,
    pub out_b: usize,
    pub n_classes: usize,
    pub total: usize,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Layout {
        let h = cfg.hidden;
        let mut off = 0;
        let mut layers = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let in_dim = if l == 0 { cfg.input_dim } else { h };
            let w = off;
            off += 4 * h * (in_dim + h);
            let b = off;
            off += 4 * h;
            layers.push(LayerLayout { in_dim, w, b });
        }
        let out_w = off;
        off += cfg.n_classes * h;
        let out_b = off;
        off += cfg.n_classes;
        Layout { hidden: h, layers, out_w, out_b, n_classes: cfg.n_classes, total: off }
    }

    /// Parameter index ranges of the forget-gate rows (weights and biases) of every layer.
    pub fn forget_gate_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let h = self.hidden;
        self.layers
            .iter()
            .flat_map(|l| {
                let row = l.row_len(h);
                [l.w + h * row..l.w + 2 * h * row, l.b + h..l.b + 2 * h]
            })
            .collect()
    }
}

/// Standardization applied to the duration input component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationNorm {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub duration_norm: Option<DurationNorm>,
    #[serde(skip)]
    pub adam: AdamState,
}

/// Gradient vector with the same layout as [`ModelParams::weights`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<f64>);

impl Gradients {
    pub fn zeros(n: usize) -> Self {
        Gradients(vec![0.0; n])
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

impl ModelParams {
    /// All-zero parameters.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let n = Layout::new(&config).total;
        Ok(ModelParams { config, weights: vec![0.0; n], duration_norm: None, adam: AdamState::new(n) })
    }

    /// Uniform in `±sqrt(6 / (fan_in + fan_out))` per matrix, forget-gate
    /// biases 1, other biases 0.
    pub fn init(config: ModelConfig, rng: &mut Rng) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let layout = p.layout();
        let h = layout.hidden;
        for l in &layout.layers {
            let n = 4 * h * l.row_len(h);
            let limit = (6.0 / (l.row_len(h) + 4 * h) as f64).sqrt();
            for w in &mut p.weights[l.w..l.w + n] {
                *w = rng.random_range(-limit..limit);
            }
            for b in &mut p.weights[l.b + h..l.b + 2 * h] {
                *b = 1.0;
            }
        }
        let limit = (6.0 / (h + layout.n_classes) as f64).sqrt();
        for w in &mut p.weights[layout.out_w..layout.out_w + layout.n_classes * h] {
            *w = rng.random_range(-limit..limit);
        }
        Ok(p)
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.config)
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let artifact = Artifact { version: ARTIFACT_VERSION, params: self.clone() };
        let text = serde_json::to_string(&artifact)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Artifact { version: ARTIFACT_VERSION, params: self.clone() })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let artifact: Artifact = serde_json::from_str(text)?;
        if artifact.version != ARTIFACT_VERSION {
            return Err(Error::Validation(format!(
                "model artifact version {} is not supported (expected {ARTIFACT_VERSION})",
                artifact.version
            )));
        }
        let mut p = artifact.params;
        p.config.validate()?;
        let n = p.layout().total;
        if p.weights.len() != n {
            return Err(Error::Dimension { expected: n, actual: p.weights.len() });
        }
        p.adam = AdamState::new(n);
        Ok(p)
    }
}

#[derive(Serialize, Deserialize)]
struct Artifact {
    version: u32,
    params: ModelParams,
}
