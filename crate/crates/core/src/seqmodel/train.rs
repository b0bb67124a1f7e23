use rand::seq::SliceRandom;

use super::lstm::{accumulate, forward_into, Workspace};
use super::{adam_step, DurationNorm, Gradients, ModelConfig, ModelParams, PROB_FLOOR};
use crate::error::{Error, Result};
use crate::seed;

const TAG_INIT: u64 = 1;
const TAG_SHUFFLE: u64 = 2;
const TAG_DROPOUT: u64 = 3;

/// One training example: a borrowed window of feature vectors and its class.
#[derive(Debug, Clone)]
pub struct Sample<'a> {
    pub window: Vec<&'a [f64]>,
    pub target: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    /// Mean training loss per epoch, measured with dropout active.
    pub epoch_loss: Vec<f64>,
}

pub fn train(cfg: &ModelConfig, samples: &[Sample<'_>], seed: u64) -> Result<ModelParams> {
    train_with_history(cfg, samples, seed).map(|(p, _)| p)
}

/// Trains for `cfg.epochs` epochs of shuffled mini-batches and returns
/// the final parameters. Samples are processed sequentially in a fixed
/// order, so the result is a deterministic function of the inputs and `seed`.
pub fn train_with_history(
    cfg: &ModelConfig,
    samples: &[Sample<'_>],
    seed: u64,
) -> Result<(ModelParams, TrainHistory)> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if let Some(s) = samples.iter().find(|s| s.target >= cfg.n_classes) {
        return Err(Error::OutOfRange { index: s.target, len: cfg.n_classes });
    }

    let mut params = ModelParams::init(cfg.clone(), &mut seed::rng(seed, &[TAG_INIT]))?;
    if cfg.duration_input {
        // every training activity is the last step of exactly one window
        let values: Vec<f64> = samples
            .iter()
            .filter_map(|s| s.window.last().and_then(|v| v.last()).copied())
            .collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = if var.sqrt() > 1e-9 { var.sqrt() } else { 1.0 };
        params.duration_norm = Some(DurationNorm { mean, sd });
    }

    let layout = params.layout();
    let mut shuffle_rng = seed::rng(seed, &[TAG_SHUFFLE]);
    let mut dropout_rng = seed::rng(seed, &[TAG_DROPOUT]);
    let mut ws = Workspace::default();
    let mut grads = Gradients::zeros(layout.total);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = TrainHistory::default();

    for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.0.fill(0.0);
            let scale = 1.0 / batch.len() as f64;
            for &k in batch {
                let s = &samples[k];
                forward_into(&params, &layout, &s.window, Some(&mut dropout_rng), &mut ws)?;
                epoch_loss -= ws.cache.probs[s.target].max(PROB_FLOOR).ln();
                accumulate(&params, &layout, s.target, scale, &mut grads, &mut ws)?;
            }
            adam_step(&mut params, &grads, cfg.learning_rate)?;
        }
        history.epoch_loss.push(epoch_loss / samples.len() as f64);
    }
    if !params.is_finite() {
        return Err(Error::Validation("training produced non-finite parameters".into()));
    }
    Ok((params, history))
}
