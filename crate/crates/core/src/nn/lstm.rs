//! Stacked LSTM classifier.
//!
//! Each layer runs the standard gated recurrence from zero initial state:
//!
//! ```text
//! [i f g o] = W·[x_t; h_{t-1}] + b
//! c_t = σ(f)⊙c_{t-1} + σ(i)⊙tanh(g)
//! h_t = σ(o)⊙tanh(c_t)
//! ```
//!
//! The top layer's final hidden state goes through ReLU and a linear head.
//! `W` is stored row-major `4H × (in + H)` with gate blocks in `i, f, g, o`
//! order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ops::{axpy, cross_entropy, dot, sigmoid, softmax, softmax_xent_grad};
use super::{check_channels, check_label, fill_uniform, Network};
use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;
use crate::trial::NUM_CLASSES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmConfig {
    pub input_channels: usize,
    pub hidden: usize,
    pub layers: usize,
    pub num_classes: usize,
    /// Average the loss of the head applied at every step instead of only
    /// the last one. Prediction always uses the last step.
    #[serde(default)]
    pub per_step_loss: bool,
}

impl LstmConfig {
    pub fn new(input_channels: usize) -> Self {
        LstmConfig {
            input_channels,
            hidden: 50,
            layers: 2,
            num_classes: NUM_CLASSES,
            per_step_loss: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerLayout {
    n_in: usize,
    w: usize,
    b: usize,
}

fn layout(cfg: &LstmConfig) -> (Vec<LayerLayout>, usize, usize, usize) {
    let h = cfg.hidden;
    let mut off = 0;
    let mut layers = Vec::with_capacity(cfg.layers);
    for l in 0..cfg.layers {
        let n_in = if l == 0 { cfg.input_channels } else { h };
        let w = off;
        off += 4 * h * (n_in + h);
        let b = off;
        off += 4 * h;
        layers.push(LayerLayout { n_in, w, b });
    }
    let head_w = off;
    off += cfg.num_classes * h;
    let head_b = off;
    off += cfg.num_classes;
    (layers, head_w, head_b, off)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub config: LstmConfig,
    pub params: Vec<f64>,
}

/// Final hidden and cell state of every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

struct LayerCache {
    /// `[x_t; h_{t-1}]` per step.
    v: Vec<Vec<f64>>,
    /// Activated gates `[σ(i) σ(f) tanh(g) σ(o)]` per step.
    gates: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    tanh_c: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
}

impl LstmModel {
    /// Uniform(−1/√H, 1/√H) initialization for every weight and bias.
    pub fn new(config: LstmConfig, seed: u64) -> Result<Self> {
        if config.input_channels == 0 || config.hidden == 0 || config.layers == 0 {
            return Err(Error::InvalidParameter("lstm: empty layer".into()));
        }
        let (_, _, _, total) = layout(&config);
        let mut params = vec![0.0; total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        fill_uniform(&mut rng, &mut params, 1.0 / (config.hidden as f64).sqrt());
        Ok(LstmModel { config, params })
    }

    pub fn zeros(config: LstmConfig) -> Result<Self> {
        let (_, _, _, total) = layout(&config);
        Ok(LstmModel {
            config,
            params: vec![0.0; total],
        })
    }

    /// Bias of gate `gate` (0 = input, 1 = forget, 2 = cell, 3 = output) in
    /// layer `layer`.
    pub fn gate_bias_mut(&mut self, layer: usize, gate: usize) -> &mut [f64] {
        let (layers, _, _, _) = layout(&self.config);
        let h = self.config.hidden;
        let start = layers[layer].b + gate * h;
        &mut self.params[start..start + h]
    }

    pub fn head_bias(&self) -> &[f64] {
        let (_, _, head_b, _) = layout(&self.config);
        &self.params[head_b..head_b + self.config.num_classes]
    }

    pub fn final_state(&self, fm: &FeatureMatrix) -> Result<LstmState> {
        let caches = self.run(fm)?;
        Ok(LstmState {
            h: caches.iter().map(|c| c.h.last().cloned().unwrap_or_default()).collect(),
            c: caches.iter().map(|c| c.c.last().cloned().unwrap_or_default()).collect(),
        })
    }

    fn run(&self, fm: &FeatureMatrix) -> Result<Vec<LayerCache>> {
        check_channels(self.config.input_channels, fm)?;
        let (layers, _, _, _) = layout(&self.config);
        let h = self.config.hidden;
        let t_len = fm.rows;
        let mut inputs: Vec<Vec<f64>> = (0..t_len).map(|t| fm.row(t).to_vec()).collect();
        let mut caches = Vec::with_capacity(layers.len());
        for l in &layers {
            let w = &self.params[l.w..l.b];
            let b = &self.params[l.b..l.b + 4 * h];
            let width = l.n_in + h;
            let mut cache = LayerCache {
                v: Vec::with_capacity(t_len),
                gates: Vec::with_capacity(t_len),
                c: Vec::with_capacity(t_len),
                tanh_c: Vec::with_capacity(t_len),
                h: Vec::with_capacity(t_len),
            };
            let mut h_prev = vec![0.0; h];
            let mut c_prev = vec![0.0; h];
            for x in &inputs {
                let mut v = Vec::with_capacity(width);
                v.extend_from_slice(x);
                v.extend_from_slice(&h_prev);
                let mut gates = vec![0.0; 4 * h];
                for (r, gv) in gates.iter_mut().enumerate() {
                    let z = b[r] + dot(&w[r * width..(r + 1) * width], &v);
                    *gv = if (2 * h..3 * h).contains(&r) { z.tanh() } else { sigmoid(z) };
                }
                let mut c = vec![0.0; h];
                let mut tc = vec![0.0; h];
                let mut hn = vec![0.0; h];
                for j in 0..h {
                    c[j] = gates[h + j] * c_prev[j] + gates[j] * gates[2 * h + j];
                    tc[j] = c[j].tanh();
                    hn[j] = gates[3 * h + j] * tc[j];
                }
                cache.v.push(v);
                cache.gates.push(gates);
                h_prev = hn.clone();
                c_prev = c.clone();
                cache.c.push(c);
                cache.tanh_c.push(tc);
                cache.h.push(hn);
            }
            inputs = cache.h.clone();
            caches.push(cache);
        }
        Ok(caches)
    }

    fn head(&self, h: &[f64]) -> Vec<f64> {
        let (_, head_w, head_b, _) = layout(&self.config);
        let n = self.config.hidden;
        let hidden: Vec<f64> = h.iter().map(|v| v.max(0.0)).collect();
        (0..self.config.num_classes)
            .map(|c| self.params[head_b + c] + dot(&self.params[head_w + c * n..head_w + (c + 1) * n], &hidden))
            .collect()
    }

    /// Adds head gradients for a loss applied to `h`, scaled by `scale`;
    /// returns the loss and `∂loss/∂h`.
    fn head_backward(&self, h: &[f64], label: usize, scale: f64, grad: &mut [f64]) -> (f64, Vec<f64>) {
        let (_, head_w, head_b, _) = layout(&self.config);
        let n = self.config.hidden;
        let logits = self.head(h);
        let mut dlog = vec![0.0; self.config.num_classes];
        let loss = softmax_xent_grad(&logits, label, &mut dlog);
        let mut dh = vec![0.0; n];
        for (c, &g) in dlog.iter().enumerate() {
            let g = g * scale;
            grad[head_b + c] += g;
            for j in 0..n {
                if h[j] > 0.0 {
                    grad[head_w + c * n + j] += g * h[j];
                    dh[j] += g * self.params[head_w + c * n + j];
                }
            }
        }
        (loss * scale, dh)
    }
}

impl Network for LstmModel {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn input_channels(&self) -> usize {
        self.config.input_channels
    }

    fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    fn logits(&self, fm: &FeatureMatrix) -> Result<Vec<f64>> {
        let caches = self.run(fm)?;
        let top = caches.last().and_then(|c| c.h.last()).expect("at least one layer and step");
        Ok(self.head(top))
    }

    fn loss(&self, fm: &FeatureMatrix, label: usize) -> Result<f64> {
        check_label(label, self.config.num_classes)?;
        let caches = self.run(fm)?;
        let top = &caches.last().expect("at least one layer").h;
        if self.config.per_step_loss {
            let total: f64 = top.iter().map(|h| cross_entropy(&softmax(&self.head(h)), label)).sum();
            Ok(total / top.len() as f64)
        } else {
            Ok(cross_entropy(&softmax(&self.head(&top[top.len() - 1])), label))
        }
    }

    fn loss_and_grad(&self, fm: &FeatureMatrix, label: usize, grad: &mut [f64]) -> Result<f64> {
        check_label(label, self.config.num_classes)?;
        let caches = self.run(fm)?;
        let (layers, _, _, _) = layout(&self.config);
        let h = self.config.hidden;
        let t_len = fm.rows;

        // gradient arriving at each step's hidden output of the current layer
        let mut dh_ext = vec![vec![0.0; h]; t_len];
        let top = &caches[caches.len() - 1];
        let mut loss = 0.0;
        if self.config.per_step_loss {
            let scale = 1.0 / t_len as f64;
            for t in 0..t_len {
                let (l, dh) = self.head_backward(&top.h[t], label, scale, grad);
                loss += l;
                dh_ext[t] = dh;
            }
        } else {
            let (l, dh) = self.head_backward(&top.h[t_len - 1], label, 1.0, grad);
            loss = l;
            dh_ext[t_len - 1] = dh;
        }

        for (li, (l, cache)) in layers.iter().zip(&caches).enumerate().rev() {
            let width = l.n_in + h;
            let w = &self.params[l.w..l.b];
            let mut dh_next = vec![0.0; h];
            let mut dc_next = vec![0.0; h];
            let mut dx = if li > 0 { vec![vec![0.0; l.n_in]; t_len] } else { Vec::new() };
            let mut dz = vec![0.0; 4 * h];
            for t in (0..t_len).rev() {
                let gates = &cache.gates[t];
                let c_prev = if t > 0 { &cache.c[t - 1][..] } else { &[][..] };
                for j in 0..h {
                    let (ig, fg, gg, og) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                    let tc = cache.tanh_c[t][j];
                    let dhj = dh_ext[t][j] + dh_next[j];
                    let dc = dhj * og * (1.0 - tc * tc) + dc_next[j];
                    let cp = if t > 0 { c_prev[j] } else { 0.0 };
                    dz[j] = dc * gg * ig * (1.0 - ig);
                    dz[h + j] = dc * cp * fg * (1.0 - fg);
                    dz[2 * h + j] = dc * ig * (1.0 - gg * gg);
                    dz[3 * h + j] = dhj * tc * og * (1.0 - og);
                    dc_next[j] = dc * fg;
                }
                let v = &cache.v[t];
                let mut dv = vec![0.0; width];
                for (r, &g) in dz.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    grad[l.b + r] += g;
                    let wo = l.w + r * width;
                    axpy(g, v, &mut grad[wo..wo + width]);
                    axpy(g, &w[r * width..(r + 1) * width], &mut dv);
                }
                dh_next.copy_from_slice(&dv[l.n_in..]);
                if li > 0 {
                    dx[t].copy_from_slice(&dv[..l.n_in]);
                }
            }
            dh_ext = dx;
        }
        Ok(loss)
    }
}
