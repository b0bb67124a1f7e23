use serde::{Deserialize, Serialize};

use super::{Gradients, ModelParams};
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment accumulators plus the step counter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }
}

/// One bias-corrected Adam update. A non-finite gradient aborts before
/// anything is modified.
pub fn adam_step(p: &mut ModelParams, grads: &Gradients, lr: f64) -> Result<()> {
    let n = p.weights.len();
    if grads.0.len() != n {
        return Err(Error::Dimension { expected: n, actual: grads.0.len() });
    }
    if let Some(k) = grads.0.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(k));
    }
    if p.adam.m.len() != n {
        p.adam = AdamState::new(n);
    }
    let st = &mut p.adam;
    st.step += 1;
    let t = st.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for k in 0..n {
        let g = grads.0[k];
        let m = BETA1 * st.m[k] + (1.0 - BETA1) * g;
        let v = BETA2 * st.v[k] + (1.0 - BETA2) * g * g;
        st.m[k] = m;
        st.v[k] = v;
        p.weights[k] -= lr * (m / c1) / ((v / c2).sqrt() + EPSILON);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqmodel::ModelConfig;

    fn params() -> ModelParams {
        let cfg = ModelConfig { layers: 1, hidden: 2, input_dim: 2, n_classes: 2, window_n: 1, ..Default::default() };
        let mut p = ModelParams::zeros(cfg).unwrap();
        for (k, w) in p.weights.iter_mut().enumerate() {
            *w = k as f64 * 0.01;
        }
        p
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut p = params();
        let before = p.weights.clone();
        adam_step(&mut p, &Gradients::zeros(before.len()), 0.001).unwrap();
        assert_eq!(p.weights, before);
        assert_eq!(p.adam.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate_against_the_sign() {
        let mut p = params();
        let before = p.weights.clone();
        let g: Vec<f64> = (0..before.len()).map(|k| if k % 2 == 0 { 0.3 + k as f64 } else { -2.0 }).collect();
        adam_step(&mut p, &Gradients(g.clone()), 0.001).unwrap();
        for k in 0..before.len() {
            let expected = -0.001 * g[k].signum();
            assert!((p.weights[k] - before[k] - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn state_evolves() {
        let g = Gradients(vec![0.5; params().weights.len()]);
        let mut a = params();
        adam_step(&mut a, &g, 0.01).unwrap();
        adam_step(&mut a, &g, 0.01).unwrap();
        let mut b = params();
        b.adam.step = 1;
        adam_step(&mut b, &g, 0.01).unwrap();
        assert_eq!(a.adam.step, b.adam.step);
        assert_ne!(a.weights, b.weights);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = params();
        let mut g = vec![0.1; p.weights.len()];
        g[3] = f64::NAN;
        let before = p.clone();
        assert!(matches!(adam_step(&mut p, &Gradients(g), 0.01), Err(Error::NonFinite(3))));
        assert_eq!(p, before);
    }
}
