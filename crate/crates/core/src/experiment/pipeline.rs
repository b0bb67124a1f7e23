use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{duration_weighted_accuracy, sequence_accuracy};
use crate::seqmodel::{train, ClassSet, ModelConfig, ModelParams, Sample, Workspace};
use crate::workflow::{feature_dim, ActivityTuple, Dataset, EncodedSequence, MaskConfig, Token, POSITIONS};

const SAVED_MODEL_VERSION: u32 = 1;

/// A trained classifier together with everything needed to apply it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub mask: MaskConfig,
    pub classes: ClassSet,
    pub params: ModelParams,
}

/// Score of one test sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub accuracy: f64,
    /// Share of truth activities that are not among the model's classes.
    pub unseen_rate: f64,
}

impl TrainedModel {
    /// Predicted full tuple for every activity of `observed`.
    pub fn predict_sequence(&self, observed: &[ActivityTuple], d: &Dataset) -> Result<Vec<[Token; POSITIONS]>> {
        let cfg = &self.params.config;
        let enc = EncodedSequence::new(observed, &self.mask, &d.vocab, cfg.duration_input);
        if let Some(row) = enc.rows.first() {
            if row.len() != cfg.input_dim {
                return Err(Error::Dimension { expected: cfg.input_dim, actual: row.len() });
            }
        }
        let layout = self.params.layout();
        let mut ws = Workspace::default();
        (0..enc.len())
            .map(|i| {
                let window = enc.window(i, cfg.window_n);
                let pred = crate::seqmodel::predict_with(&self.params, &layout, &window, &mut ws)?;
                Ok(*self.classes.tuple(pred.class))
            })
            .collect()
    }

    pub fn unseen_rate(&self, truth: &[ActivityTuple]) -> f64 {
        if truth.is_empty() {
            return 0.0;
        }
        let unseen = truth.iter().filter(|a| self.classes.class_of(&a.items).is_none()).count();
        unseen as f64 / truth.len() as f64
    }

    /// Position-wise accuracy of predictions on an observed sequence aligned
    /// with `truth`.
    pub fn score(&self, observed: &[ActivityTuple], truth: &[ActivityTuple], d: &Dataset) -> Result<Score> {
        let pred = self.predict_sequence(observed, d)?;
        Ok(Score { accuracy: sequence_accuracy(&pred, truth)?, unseen_rate: self.unseen_rate(truth) })
    }

    /// Duration-weighted accuracy when the observed segmentation differs
    /// from the truth: each observed segment carries its prediction over
    /// its own interval.
    pub fn score_timeline(&self, observed: &[ActivityTuple], truth: &[ActivityTuple], d: &Dataset) -> Result<Score> {
        let pred = self.predict_sequence(observed, d)?;
        let timeline: Vec<ActivityTuple> =
            pred.into_iter().zip(observed).map(|(items, o)| ActivityTuple::new(items, o.t_start, o.t_end)).collect();
        Ok(Score {
            accuracy: duration_weighted_accuracy(&timeline, truth)?,
            unseen_rate: self.unseen_rate(truth),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingModel { path: path.to_path_buf() });
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: TrainedModel = serde_json::from_str(&text)?;
        if m.version != SAVED_MODEL_VERSION {
            return Err(Error::Validation(format!("saved model version {} is not supported", m.version)));
        }
        // re-validates the parameter vector against its config
        let params = ModelParams::from_json(&m.params.to_json()?)?;
        Ok(TrainedModel { params, ..m })
    }
}

/// Trains one model on the interventions named in `train_ids`. Inputs are
/// masked by `mask`; targets are the full tuples, and the class set is
/// every distinct tuple in the training interventions.
///
/// `template` supplies the hyperparameters, window length and duration
/// flag; input and class sizes are derived here.
pub fn train_model(
    d: &Dataset,
    train_ids: &[String],
    mask: &MaskConfig,
    template: &ModelConfig,
    seed: u64,
) -> Result<TrainedModel> {
    let ivs = train_ids
        .iter()
        .map(|id| {
            d.intervention(id)
                .ok_or_else(|| Error::Validation(format!("unknown intervention `{id}` in training fold")))
        })
        .collect::<Result<Vec<_>>>()?;
    let classes = ClassSet::from_tuples(ivs.iter().flat_map(|iv| iv.activities.iter().map(|a| &a.items)));
    if classes.is_empty() {
        return Err(Error::InvalidArgument("training fold has no activities".into()));
    }
    let with_duration = template.duration_input;
    let encoded: Vec<EncodedSequence> =
        ivs.iter().map(|iv| EncodedSequence::new(&iv.activities, mask, &d.vocab, with_duration)).collect();
    let mut samples = Vec::new();
    for (iv, enc) in ivs.iter().zip(&encoded) {
        for (i, a) in iv.activities.iter().enumerate() {
            let target = classes.class_of(&a.items).expect("class set covers training targets");
            samples.push(Sample { window: enc.window(i, template.window_n), target });
        }
    }
    let cfg = ModelConfig {
        input_dim: feature_dim(&d.vocab, with_duration),
        n_classes: classes.len(),
        ..template.clone()
    };
    let params = train(&cfg, &samples, seed)?;
    Ok(TrainedModel { version: SAVED_MODEL_VERSION, mask: *mask, classes, params })
}
