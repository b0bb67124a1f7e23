//! Finite-difference verification of the backpropagation-through-time gradients.

use rand::seq::index;
use rand::Rng as _;

use super::lstm::{accumulate, forward_into, Workspace};
use super::{Gradients, Layout, ModelConfig, ModelParams, PROB_FLOOR};
use crate::error::{Error, Result};
use crate::seed;

/// Deliberate corruption of the analytic gradient, for negative controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    ZeroForgetGate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Number of parameters compared (all of them if the model is smaller).
    pub samples: usize,
    /// Central difference step.
    pub step: f64,
    /// Windows in the loss batch.
    pub batch: usize,
    pub fault: Option<Fault>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { samples: 200, step: 1e-5, batch: 4, fault: None }
    }
}

pub fn gradient_check(cfg: &ModelConfig, seed: u64) -> Result<f64> {
    gradient_check_with(cfg, seed, GradCheckOptions::default())
}

fn batch_loss(
    p: &ModelParams,
    layout: &Layout,
    batch: &[(Vec<Vec<f64>>, usize)],
    ws: &mut Workspace,
) -> Result<f64> {
    let mut total = 0.0;
    for (window, target) in batch {
        forward_into(p, layout, window, None, ws)?;
        total -= ws.cache.probs[*target].max(PROB_FLOOR).ln();
    }
    Ok(total / batch.len() as f64)
}

/// Maximum relative error `|ga - gn| / max(|ga|, |gn|, 1e-8)` between
/// analytic gradients and central differences, over randomly chosen
/// parameters of a randomly initialized model on random inputs.
pub fn gradient_check_with(cfg: &ModelConfig, seed: u64, opts: GradCheckOptions) -> Result<f64> {
    cfg.validate()?;
    if cfg.dropout_rate != 0.0 {
        return Err(Error::InvalidArgument("gradient check requires dropout_rate = 0".into()));
    }
    let mut rng = seed::rng(seed, &[]);
    let mut p = ModelParams::init(cfg.clone(), &mut rng)?;
    let layout = p.layout();
    for l in &layout.layers {
        for b in &mut p.weights[l.b..l.b + 4 * layout.hidden] {
            *b += rng.random_range(-0.5..0.5);
        }
    }
    for b in &mut p.weights[layout.out_b..layout.out_b + layout.n_classes] {
        *b = rng.random_range(-0.5..0.5);
    }
    let batch: Vec<(Vec<Vec<f64>>, usize)> = (0..opts.batch.max(1))
        .map(|_| {
            let window = (0..cfg.steps())
                .map(|_| (0..cfg.input_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            (window, rng.random_range(0..cfg.n_classes))
        })
        .collect();

    let mut ws = Workspace::default();
    let mut grads = Gradients::zeros(layout.total);
    let scale = 1.0 / batch.len() as f64;
    for (window, target) in &batch {
        forward_into(&p, &layout, window, None, &mut ws)?;
        accumulate(&p, &layout, *target, scale, &mut grads, &mut ws)?;
    }
    if let Some(Fault::ZeroForgetGate) = opts.fault {
        for r in layout.forget_gate_ranges() {
            grads.0[r].fill(0.0);
        }
    }

    let picked: Vec<usize> = if layout.total <= opts.samples {
        (0..layout.total).collect()
    } else {
        index::sample(&mut rng, layout.total, opts.samples).into_vec()
    };
    let mut worst = 0.0f64;
    for k in picked {
        let orig = p.weights[k];
        p.weights[k] = orig + opts.step;
        let up = batch_loss(&p, &layout, &batch, &mut ws)?;
        p.weights[k] = orig - opts.step;
        let down = batch_loss(&p, &layout, &batch, &mut ws)?;
        p.weights[k] = orig;
        let numeric = (up - down) / (2.0 * opts.step);
        let analytic = grads.0[k];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}
