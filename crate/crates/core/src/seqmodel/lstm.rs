use rand::Rng as _;

use super::{CellVariant, Gradients, Layout, ModelParams, PROB_FLOOR};
use crate::error::{Error, Result};
use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs: Vec<f64>,
    pub class: usize,
}

impl Prediction {
    fn from_probs(probs: Vec<f64>) -> Self {
        let class = argmax(&probs);
        Prediction { probs, class }
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = k;
        }
    }
    best
}

/// Cross-entropy of `pred` against `target`, probability floored at 1e-12.
pub fn loss(pred: &Prediction, target: usize) -> f64 {
    -pred.probs[target].max(PROB_FLOOR).ln()
}

#[derive(Debug, Clone, Default)]
struct LayerCache {
    in_dim: usize,
    /// Input as seen by the layer (normalized or dropped), `steps x in_dim`.
    x: Vec<f64>,
    /// Non-zero input columns per step; only filled for the first layer.
    nz: Vec<Vec<u32>>,
    /// Activated gates `i, f, o, g` per step, `steps x 4H`.
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
    /// Inverted-dropout multipliers on the layer output; empty without dropout.
    mask: Vec<f64>,
}

/// Intermediates of one forward pass, needed by [`backward`].
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    steps: usize,
    hidden: usize,
    layers: Vec<LayerCache>,
    /// Top-layer output at the last step after dropout.
    top: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Reusable buffers for forward and backward passes.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    pub cache: ForwardCache,
    z: Vec<f64>,
    dz: Vec<f64>,
    dh_in: Vec<f64>,
    dh_rec: Vec<f64>,
    dc_rec: Vec<f64>,
    dx: Vec<f64>,
    dtop: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    let n = y.len().min(x.len());
    let (y, x) = (&mut y[..n], &x[..n]);
    let mut cy = y.chunks_exact_mut(4);
    let mut cx = x.chunks_exact(4);
    for (u, v) in (&mut cy).zip(&mut cx) {
        u[0] += a * v[0];
        u[1] += a * v[1];
        u[2] += a * v[2];
        u[3] += a * v[3];
    }
    for (u, v) in cy.into_remainder().iter_mut().zip(cx.remainder()) {
        *u += a * v;
    }
}

fn check_window<W: AsRef<[f64]>>(p: &ModelParams, window: &[W]) -> Result<()> {
    let cfg = &p.config;
    if window.len() != cfg.steps() {
        return Err(Error::Dimension { expected: cfg.steps(), actual: window.len() });
    }
    for v in window {
        if v.as_ref().len() != cfg.input_dim {
            return Err(Error::Dimension { expected: cfg.input_dim, actual: v.as_ref().len() });
        }
    }
    Ok(())
}

/// Runs the network on one window. With `dropout` set, inverted dropout
/// masks are drawn from that generator; otherwise inference is deterministic.
pub(crate) fn forward_into<W: AsRef<[f64]>>(
    p: &ModelParams,
    layout: &Layout,
    window: &[W],
    mut dropout: Option<&mut Rng>,
    ws: &mut Workspace,
) -> Result<()> {
    check_window(p, window)?;
    let cfg = &p.config;
    let h = layout.hidden;
    let steps = window.len();
    let n_layers = layout.layers.len();
    let rate = cfg.dropout_rate;
    let use_dropout = dropout.is_some() && rate > 0.0;
    let keep_scale = 1.0 / (1.0 - rate);

    let cache = &mut ws.cache;
    cache.steps = steps;
    cache.hidden = h;
    cache.layers.resize_with(n_layers, LayerCache::default);
    ws.z.resize(4 * h, 0.0);

    for l in 0..n_layers {
        let ll = layout.layers[l];
        let in_dim = ll.in_dim;
        let row = ll.row_len(h);
        let (lower, rest) = cache.layers.split_at_mut(l);
        let lc = &mut rest[0];
        lc.in_dim = in_dim;
        lc.x.resize(steps * in_dim, 0.0);
        lc.gates.resize(steps * 4 * h, 0.0);
        lc.c.resize(steps * h, 0.0);
        lc.tanh_c.resize(steps * h, 0.0);
        lc.h.resize(steps * h, 0.0);

        if l == 0 {
            lc.nz.resize_with(steps, Vec::new);
            for (t, v) in window.iter().enumerate() {
                let xt = &mut lc.x[t * in_dim..(t + 1) * in_dim];
                xt.copy_from_slice(v.as_ref());
                if let (true, Some(norm)) = (cfg.duration_input, p.duration_norm) {
                    let last = in_dim - 1;
                    xt[last] = (xt[last] - norm.mean) / norm.sd;
                }
                let nz = &mut lc.nz[t];
                nz.clear();
                nz.extend(xt.iter().enumerate().filter(|(_, &x)| x != 0.0).map(|(j, _)| j as u32));
            }
        } else {
            let below = &lower[l - 1];
            if below.mask.is_empty() {
                lc.x.copy_from_slice(&below.h);
            } else {
                for ((x, hv), m) in lc.x.iter_mut().zip(&below.h).zip(&below.mask) {
                    *x = hv * m;
                }
            }
        }

        let w = &p.weights[ll.w..ll.w + 4 * h * row];
        let b = &p.weights[ll.b..ll.b + 4 * h];
        let z = &mut ws.z;
        for t in 0..steps {
            let xt = &lc.x[t * in_dim..(t + 1) * in_dim];
            let (h_before, h_now) = lc.h.split_at_mut(t * h);
            let h_prev = if t > 0 { Some(&h_before[(t - 1) * h..]) } else { None };
            for r in 0..4 * h {
                let wr = &w[r * row..(r + 1) * row];
                let mut acc = b[r];
                if l == 0 {
                    for &j in &lc.nz[t] {
                        acc += wr[j as usize] * xt[j as usize];
                    }
                } else {
                    acc += dot(&wr[..in_dim], xt);
                }
                if let Some(hp) = h_prev {
                    acc += dot(&wr[in_dim..], hp);
                }
                z[r] = acc;
            }
            let gates = &mut lc.gates[t * 4 * h..(t + 1) * 4 * h];
            let (c_before, c_now) = lc.c.split_at_mut(t * h);
            let c_prev = if t > 0 { Some(&c_before[(t - 1) * h..]) } else { None };
            let tanh_c = &mut lc.tanh_c[t * h..(t + 1) * h];
            let h_t = &mut h_now[..h];
            for j in 0..h {
                let cp = c_prev.map_or(0.0, |c| c[j]);
                let (i, f, o, g, c) = match cfg.cell {
                    CellVariant::Lstm => {
                        let i = sigmoid(z[j]);
                        let f = sigmoid(z[h + j]);
                        let o = sigmoid(z[2 * h + j]);
                        let g = z[3 * h + j].tanh();
                        (i, f, o, g, f * cp + i * g)
                    }
                    CellVariant::Linear => {
                        let g = z[3 * h + j];
                        (1.0, 1.0, 1.0, g, cp + g)
                    }
                };
                gates[j] = i;
                gates[h + j] = f;
                gates[2 * h + j] = o;
                gates[3 * h + j] = g;
                c_now[j] = c;
                let tc = match cfg.cell {
                    CellVariant::Lstm => c.tanh(),
                    CellVariant::Linear => c,
                };
                tanh_c[j] = tc;
                h_t[j] = o * tc;
            }
        }

        let top_layer = l + 1 == n_layers;
        lc.mask.clear();
        if use_dropout {
            let rng = dropout.as_deref_mut().unwrap();
            // the top layer only feeds the projection at its last step
            let mask_steps = if top_layer { 1 } else { steps };
            lc.mask.resize(steps * h, 1.0);
            for m in &mut lc.mask[(steps - mask_steps) * h..] {
                *m = if rng.random::<f64>() < rate { 0.0 } else { keep_scale };
            }
        }
    }

    let top = cache.layers.last().unwrap();
    let last = (steps - 1) * h;
    cache.top.clear();
    cache.top.extend_from_slice(&top.h[last..last + h]);
    if !top.mask.is_empty() {
        for (v, m) in cache.top.iter_mut().zip(&top.mask[last..]) {
            *v *= m;
        }
    }

    let c = layout.n_classes;
    let wy = &p.weights[layout.out_w..layout.out_w + c * h];
    let by = &p.weights[layout.out_b..layout.out_b + c];
    cache.probs.resize(c, 0.0);
    let mut max = f64::NEG_INFINITY;
    for k in 0..c {
        let v = by[k] + dot(&wy[k * h..(k + 1) * h], &cache.top);
        cache.probs[k] = v;
        max = max.max(v);
    }
    let mut sum = 0.0;
    for v in cache.probs.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in cache.probs.iter_mut() {
        *v /= sum;
    }
    Ok(())
}

/// Forward pass; `train_mode` enables dropout drawn from `rng`.
pub fn forward<W: AsRef<[f64]>>(
    p: &ModelParams,
    window: &[W],
    train_mode: bool,
    rng: &mut Rng,
) -> Result<(Prediction, ForwardCache)> {
    let layout = p.layout();
    let mut ws = Workspace::default();
    forward_into(p, &layout, window, train_mode.then_some(rng), &mut ws)?;
    let pred = Prediction::from_probs(ws.cache.probs.clone());
    Ok((pred, ws.cache))
}

/// Dropout-free inference.
pub fn predict<W: AsRef<[f64]>>(p: &ModelParams, window: &[W]) -> Result<Prediction> {
    let mut ws = Workspace::default();
    predict_with(p, &p.layout(), window, &mut ws)
}

pub(crate) fn predict_with<W: AsRef<[f64]>>(
    p: &ModelParams,
    layout: &Layout,
    window: &[W],
    ws: &mut Workspace,
) -> Result<Prediction> {
    forward_into(p, layout, window, None, ws)?;
    Ok(Prediction::from_probs(ws.cache.probs.clone()))
}

/// Exact gradient of the cross-entropy loss for one cached sample.
pub fn backward(p: &ModelParams, cache: &ForwardCache, target: usize) -> Result<Gradients> {
    let layout = p.layout();
    let mut grads = Gradients::zeros(layout.total);
    let mut ws = Workspace { cache: cache.clone(), ..Default::default() };
    accumulate(p, &layout, target, 1.0, &mut grads, &mut ws)?;
    Ok(grads)
}

/// Adds `scale` times the loss gradient of the sample cached in `ws` to `grads`.
pub(crate) fn accumulate(
    p: &ModelParams,
    layout: &Layout,
    target: usize,
    scale: f64,
    grads: &mut Gradients,
    ws: &mut Workspace,
) -> Result<()> {
    let cache = &ws.cache;
    let (h, steps, c) = (cache.hidden, cache.steps, layout.n_classes);
    if target >= c {
        return Err(Error::OutOfRange { index: target, len: c });
    }
    if cache.probs.len() != c || cache.layers.len() != layout.layers.len() {
        return Err(Error::InvalidArgument("cache does not match the model".into()));
    }
    let g = &mut grads.0;

    // softmax + cross-entropy
    ws.dtop.clear();
    ws.dtop.resize(h, 0.0);
    let wy = &p.weights[layout.out_w..layout.out_w + c * h];
    for k in 0..c {
        let d = scale * (cache.probs[k] - if k == target { 1.0 } else { 0.0 });
        g[layout.out_b + k] += d;
        axpy(&mut g[layout.out_w + k * h..layout.out_w + (k + 1) * h], d, &cache.top);
        axpy(&mut ws.dtop, d, &wy[k * h..(k + 1) * h]);
    }

    ws.dh_in.clear();
    ws.dh_in.resize(steps * h, 0.0);
    let top = cache.layers.last().unwrap();
    let last = (steps - 1) * h;
    for j in 0..h {
        let m = if top.mask.is_empty() { 1.0 } else { top.mask[last + j] };
        ws.dh_in[last + j] = ws.dtop[j] * m;
    }

    ws.dz.resize(4 * h, 0.0);
    ws.dh_rec.resize(h, 0.0);
    ws.dc_rec.resize(h, 0.0);

    for l in (0..layout.layers.len()).rev() {
        let ll = layout.layers[l];
        let lc = &cache.layers[l];
        let in_dim = ll.in_dim;
        let row = ll.row_len(h);
        let w = &p.weights[ll.w..ll.w + 4 * h * row];
        let (gw, gb) = g[ll.w..ll.b + 4 * h].split_at_mut(4 * h * row);
        ws.dh_rec.fill(0.0);
        ws.dc_rec.fill(0.0);
        if l > 0 {
            ws.dx.clear();
            ws.dx.resize(steps * in_dim, 0.0);
        }
        for t in (0..steps).rev() {
            let gates = &lc.gates[t * 4 * h..(t + 1) * 4 * h];
            let dz = &mut ws.dz;
            for j in 0..h {
                let dh = ws.dh_in[t * h + j] + ws.dh_rec[j];
                let (i, f, o, gg) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                let tc = lc.tanh_c[t * h + j];
                let c_prev = if t > 0 { lc.c[(t - 1) * h + j] } else { 0.0 };
                match p.config.cell {
                    CellVariant::Lstm => {
                        let dc = ws.dc_rec[j] + dh * o * (1.0 - tc * tc);
                        dz[j] = dc * gg * i * (1.0 - i);
                        dz[h + j] = dc * c_prev * f * (1.0 - f);
                        dz[2 * h + j] = dh * tc * o * (1.0 - o);
                        dz[3 * h + j] = dc * i * (1.0 - gg * gg);
                        ws.dc_rec[j] = dc * f;
                    }
                    CellVariant::Linear => {
                        let dc = ws.dc_rec[j] + dh;
                        dz[j] = 0.0;
                        dz[h + j] = 0.0;
                        dz[2 * h + j] = 0.0;
                        dz[3 * h + j] = dc;
                        ws.dc_rec[j] = dc;
                    }
                }
            }

            let xt = &lc.x[t * in_dim..(t + 1) * in_dim];
            let h_prev = if t > 0 { Some(&lc.h[(t - 1) * h..t * h]) } else { None };
            ws.dh_rec.fill(0.0);
            for r in 0..4 * h {
                let d = dz[r];
                if d == 0.0 {
                    continue;
                }
                gb[r] += d;
                let gwr = &mut gw[r * row..(r + 1) * row];
                let wr = &w[r * row..(r + 1) * row];
                if l == 0 {
                    for &j in &lc.nz[t] {
                        gwr[j as usize] += d * xt[j as usize];
                    }
                } else {
                    axpy(&mut gwr[..in_dim], d, xt);
                    axpy(&mut ws.dx[t * in_dim..(t + 1) * in_dim], d, &wr[..in_dim]);
                }
                if let Some(hp) = h_prev {
                    axpy(&mut gwr[in_dim..], d, hp);
                    axpy(&mut ws.dh_rec, d, &wr[in_dim..]);
                }
            }
        }
        if l > 0 {
            // gradient reaching the layer below through its (dropped) output
            let below = &cache.layers[l - 1];
            ws.dh_in.clear();
            ws.dh_in.extend_from_slice(&ws.dx);
            if !below.mask.is_empty() {
                for (d, m) in ws.dh_in.iter_mut().zip(&below.mask) {
                    *d *= m;
                }
            }
        }
    }
    Ok(())
}
