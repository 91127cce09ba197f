//! Temporal convolutional network.
//!
//! `depth` blocks of same-padded 1-D convolution → ReLU → max-pool(2, stride 2),
//! then flatten → ReLU → linear. With the defaults (four blocks of 32
//! channels, kernel 5, 64 input steps) the temporal ladder is
//! 64 → 32 → 16 → 8 → 4 and the head sees 4·32 = 128 features.
//!
//! Conv weights are stored `[out][tap][in]`; the head weights `[class][feature]`
//! with features flattened time-major.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ops::{axpy, dot, softmax_xent_grad};
use super::{check_channels, check_label, fill_uniform, Network};
use crate::error::{Error, Result};
use crate::preprocess::{FeatureMatrix, DEFAULT_GRID_LEN};
use crate::trial::NUM_CLASSES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcnConfig {
    pub input_channels: usize,
    pub seq_len: usize,
    pub widths: Vec<usize>,
    pub kernel: usize,
    pub num_classes: usize,
}

impl TcnConfig {
    pub fn new(input_channels: usize) -> Self {
        TcnConfig {
            input_channels,
            seq_len: DEFAULT_GRID_LEN,
            widths: vec![32; 4],
            kernel: 5,
            num_classes: NUM_CLASSES,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(format!("tcn: {m}")));
        if self.input_channels == 0 || self.widths.is_empty() || self.widths.contains(&0) {
            return bad("empty layer".into());
        }
        if self.kernel % 2 == 0 {
            return bad(format!("kernel {} must be odd for same padding", self.kernel));
        }
        if self.seq_len >> self.widths.len() == 0 {
            return bad(format!(
                "sequence length {} too short for {} pooling stages",
                self.seq_len,
                self.widths.len()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct ConvLayout {
    c_in: usize,
    c_out: usize,
    t_in: usize,
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct HeadLayout {
    d_in: usize,
    w: usize,
    b: usize,
}

fn layout(cfg: &TcnConfig) -> (Vec<ConvLayout>, HeadLayout, usize) {
    let mut off = 0;
    let mut c_in = cfg.input_channels;
    let mut t = cfg.seq_len;
    let mut convs = Vec::with_capacity(cfg.widths.len());
    for &c_out in &cfg.widths {
        let w = off;
        off += c_out * cfg.kernel * c_in;
        let b = off;
        off += c_out;
        convs.push(ConvLayout { c_in, c_out, t_in: t, w, b });
        c_in = c_out;
        t /= 2;
    }
    let d_in = t * c_in;
    let w = off;
    off += cfg.num_classes * d_in;
    let b = off;
    off += cfg.num_classes;
    (convs, HeadLayout { d_in, w, b }, off)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcnModel {
    pub config: TcnConfig,
    pub params: Vec<f64>,
}

struct BlockCache {
    input: Vec<f64>,
    pre: Vec<f64>,
    /// For each pooled output, the index into `pre` it was taken from.
    argmax: Vec<usize>,
}

struct Cache {
    blocks: Vec<BlockCache>,
    flat: Vec<f64>,
    logits: Vec<f64>,
}

/// Same-padded convolution: `x` is `t × c_in`, the result `t × c_out`.
fn conv_forward(x: &[f64], l: &ConvLayout, k: usize, p: &[f64]) -> Vec<f64> {
    let pad = k / 2;
    let (t, ci, co) = (l.t_in, l.c_in, l.c_out);
    let w = &p[l.w..l.w + co * k * ci];
    let b = &p[l.b..l.b + co];
    let mut z = vec![0.0; t * co];
    for tt in 0..t {
        let lo = pad.saturating_sub(tt);
        let hi = k.min(t + pad - tt);
        for o in 0..co {
            let mut acc = b[o];
            for kk in lo..hi {
                let src = tt + kk - pad;
                acc += dot(&x[src * ci..(src + 1) * ci], &w[(o * k + kk) * ci..(o * k + kk + 1) * ci]);
            }
            z[tt * co + o] = acc;
        }
    }
    z
}

/// ReLU followed by width-2 max pooling; ties keep the earlier step.
fn relu_pool(z: &[f64], t: usize, c: usize) -> (Vec<f64>, Vec<usize>) {
    let t_out = t / 2;
    let mut out = vec![0.0; t_out * c];
    let mut arg = vec![0; t_out * c];
    for s in 0..t_out {
        for o in 0..c {
            let a = (2 * s) * c + o;
            let b = (2 * s + 1) * c + o;
            let pick = if z[b] > z[a] { b } else { a };
            out[s * c + o] = z[pick].max(0.0);
            arg[s * c + o] = pick;
        }
    }
    (out, arg)
}

impl TcnModel {
    /// He-uniform conv weights, zero biases, seeded.
    pub fn new(config: TcnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (convs, head, total) = layout(&config);
        let mut params = vec![0.0; total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in &convs {
            let fan_in = (l.c_in * config.kernel) as f64;
            fill_uniform(&mut rng, &mut params[l.w..l.b], (6.0 / fan_in).sqrt());
        }
        let bound = (1.0 / head.d_in as f64).sqrt();
        fill_uniform(&mut rng, &mut params[head.w..head.b], bound);
        Ok(TcnModel { config, params })
    }

    pub fn zeros(config: TcnConfig) -> Result<Self> {
        config.validate()?;
        let (_, _, total) = layout(&config);
        Ok(TcnModel {
            config,
            params: vec![0.0; total],
        })
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Mutable view of the weights of conv layer `layer`, `[out][tap][in]`.
    pub fn conv_weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let (convs, _, _) = layout(&self.config);
        let l = convs[layer];
        &mut self.params[l.w..l.b]
    }

    /// Output of conv layer `layer` before the nonlinearity, `t × c_out`.
    pub fn conv_output(&self, layer: usize, fm: &FeatureMatrix) -> Result<Vec<f64>> {
        let cache = self.forward_cached(fm)?;
        let (convs, _, _) = layout(&self.config);
        if layer >= convs.len() {
            return Err(Error::InvalidParameter(format!("no conv layer {layer}")));
        }
        Ok(cache.blocks[layer].pre.clone())
    }

    /// Pooled activations of the last block, flattened time-major; the
    /// input to the classification head.
    pub fn final_activations(&self, fm: &FeatureMatrix) -> Result<Vec<f64>> {
        Ok(self.forward_cached(fm)?.flat)
    }

    fn check(&self, fm: &FeatureMatrix) -> Result<()> {
        check_channels(self.config.input_channels, fm)?;
        if fm.rows != self.config.seq_len {
            return Err(Error::dims(
                format!("{} rows", self.config.seq_len),
                format!("{} rows", fm.rows),
            ));
        }
        Ok(())
    }

    fn forward_cached(&self, fm: &FeatureMatrix) -> Result<Cache> {
        self.check(fm)?;
        let (convs, head, _) = layout(&self.config);
        let p = &self.params;
        let mut x = fm.values.clone();
        let mut blocks = Vec::with_capacity(convs.len());
        for l in &convs {
            let pre = conv_forward(&x, l, self.config.kernel, p);
            let (out, argmax) = relu_pool(&pre, l.t_in, l.c_out);
            blocks.push(BlockCache {
                input: std::mem::replace(&mut x, out),
                pre,
                argmax,
            });
        }
        let flat = x;
        let hidden: Vec<f64> = flat.iter().map(|v| v.max(0.0)).collect();
        let logits = (0..self.config.num_classes)
            .map(|c| p[head.b + c] + dot(&p[head.w + c * head.d_in..head.w + (c + 1) * head.d_in], &hidden))
            .collect();
        Ok(Cache { blocks, flat, logits })
    }
}

impl Network for TcnModel {
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
        Ok(self.forward_cached(fm)?.logits)
    }

    fn loss_and_grad(&self, fm: &FeatureMatrix, label: usize, grad: &mut [f64]) -> Result<f64> {
        check_label(label, self.config.num_classes)?;
        let cache = self.forward_cached(fm)?;
        let (convs, head, _) = layout(&self.config);
        let p = &self.params;
        let k = self.config.kernel;
        let pad = k / 2;

        let mut dlogits = vec![0.0; self.config.num_classes];
        let loss = softmax_xent_grad(&cache.logits, label, &mut dlogits);

        let mut dflat = vec![0.0; head.d_in];
        for (c, &g) in dlogits.iter().enumerate() {
            grad[head.b + c] += g;
            let w = &p[head.w + c * head.d_in..head.w + (c + 1) * head.d_in];
            let gw = &mut grad[head.w + c * head.d_in..head.w + (c + 1) * head.d_in];
            for i in 0..head.d_in {
                if cache.flat[i] > 0.0 {
                    gw[i] += g * cache.flat[i];
                    dflat[i] += g * w[i];
                }
            }
        }

        let mut dout = dflat;
        for (l, bc) in convs.iter().zip(&cache.blocks).rev() {
            let (t, ci, co) = (l.t_in, l.c_in, l.c_out);
            let mut dz = vec![0.0; t * co];
            for (j, &idx) in bc.argmax.iter().enumerate() {
                if bc.pre[idx] > 0.0 {
                    dz[idx] += dout[j];
                }
            }
            let mut dx = vec![0.0; t * ci];
            for tt in 0..t {
                let lo = pad.saturating_sub(tt);
                let hi = k.min(t + pad - tt);
                for o in 0..co {
                    let g = dz[tt * co + o];
                    if g == 0.0 {
                        continue;
                    }
                    grad[l.b + o] += g;
                    for kk in lo..hi {
                        let src = tt + kk - pad;
                        let wo = l.w + (o * k + kk) * ci;
                        axpy(g, &bc.input[src * ci..(src + 1) * ci], &mut grad[wo..wo + ci]);
                        axpy(g, &p[wo..wo + ci], &mut dx[src * ci..(src + 1) * ci]);
                    }
                }
            }
            dout = dx;
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_input(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> FeatureMatrix {
        let names = (0..cols).map(|j| format!("c{j}")).collect();
        let values = (0..rows * cols).map(|_| rng.random_range(-1.5..1.5)).collect();
        FeatureMatrix::new(rows, names, values).unwrap()
    }

    /// Direct-summation reference: channel-major arrays, explicit zero padding,
    /// and a separate ReLU/pool pass.
    fn oracle_logits(model: &TcnModel, fm: &FeatureMatrix) -> Vec<f64> {
        let cfg = &model.config;
        let p = &model.params;
        let k = cfg.kernel as isize;
        // act[channel][time]
        let mut act: Vec<Vec<f64>> = (0..fm.cols()).map(|j| fm.column(j)).collect();
        let mut off = 0;
        for &c_out in &cfg.widths {
            let c_in = act.len();
            let t = act[0].len() as isize;
            let w_off = off;
            let b_off = off + c_out * cfg.kernel * c_in;
            off = b_off + c_out;
            let mut z = vec![vec![0.0; t as usize]; c_out];
            for o in 0..c_out {
                for tt in 0..t {
                    let mut s = p[b_off + o];
                    for i in 0..c_in {
                        for kk in 0..k {
                            let src = tt + kk - k / 2;
                            let xv = if src < 0 || src >= t { 0.0 } else { act[i][src as usize] };
                            s += p[w_off + (o * cfg.kernel + kk as usize) * c_in + i] * xv;
                        }
                    }
                    z[o][tt as usize] = s;
                }
            }
            act = z
                .iter()
                .map(|row| {
                    let r: Vec<f64> = row.iter().map(|v| v.max(0.0)).collect();
                    r.chunks_exact(2).map(|c| c[0].max(c[1])).collect()
                })
                .collect();
        }
        let t_last = act[0].len();
        let mut flat = Vec::new();
        for s in 0..t_last {
            for ch in &act {
                flat.push(ch[s].max(0.0));
            }
        }
        let d = flat.len();
        (0..cfg.num_classes)
            .map(|c| p[off + cfg.num_classes * d + c] + (0..d).map(|i| p[off + c * d + i] * flat[i]).sum::<f64>())
            .collect()
    }

    #[test]
    fn default_shapes() {
        let m = TcnModel::new(TcnConfig::new(24), 0).unwrap();
        let (_, head, total) = layout(&m.config);
        assert_eq!(head.d_in, 128);
        assert_eq!(total, m.params.len());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(m.logits(&random_input(&mut rng, 64, 24)).unwrap().len(), 4);
        assert!(matches!(m.logits(&random_input(&mut rng, 64, 23)), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(m.logits(&random_input(&mut rng, 63, 24)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_model_gives_zero_logits() {
        let m = TcnModel::zeros(TcnConfig::new(3)).unwrap();
        let fm = FeatureMatrix::new(64, vec!["a".into(), "b".into(), "c".into()], vec![0.0; 192]).unwrap();
        assert_eq!(m.logits(&fm).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn delta_kernel_is_identity() {
        let mut cfg = TcnConfig::new(1);
        cfg.widths = vec![1];
        let mut m = TcnModel::zeros(cfg).unwrap();
        m.conv_weights_mut(0)[2] = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let fm = random_input(&mut rng, 64, 1);
        assert_eq!(m.conv_output(0, &fm).unwrap(), fm.values);
    }

    #[test]
    fn matches_direct_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for seed in 0..3 {
            let m = TcnModel::new(TcnConfig::new(5), seed).unwrap();
            let mut m = m;
            // nonzero biases exercise the bias path too
            let (convs, head, _) = layout(&m.config);
            for l in &convs {
                for b in &mut m.params[l.b..l.b + l.c_out] {
                    *b = rng.random_range(-0.1..0.1);
                }
            }
            for b in &mut m.params[head.b..] {
                *b = rng.random_range(-0.1..0.1);
            }
            let fm = random_input(&mut rng, 64, 5);
            let got = m.logits(&fm).unwrap();
            let want = oracle_logits(&m, &fm);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-10, "{g} vs {w}");
            }
        }
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let m = TcnModel::new(TcnConfig::new(4), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fm = random_input(&mut rng, 64, 4);
        let a = m.logits(&fm).unwrap();
        let b = m.logits(&fm).unwrap();
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = TcnConfig::new(2);
        cfg.kernel = 4;
        assert!(TcnModel::new(cfg, 0).is_err());
        let mut cfg = TcnConfig::new(2);
        cfg.seq_len = 8;
        assert!(TcnModel::new(cfg, 0).is_err());
    }
}
