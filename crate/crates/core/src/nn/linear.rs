//! Single linear layer over the whole flattened matrix.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ops::{axpy, dot, softmax_xent_grad};
use super::{check_channels, check_label, fill_uniform, Network};
use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;
use crate::trial::NUM_CLASSES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub input_channels: usize,
    pub seq_len: usize,
    pub num_classes: usize,
    /// `[class][row·channels + col]` weights followed by the class biases.
    pub params: Vec<f64>,
}

impl LinearModel {
    pub fn new(input_channels: usize, seq_len: usize, seed: u64) -> Self {
        let d = input_channels * seq_len;
        let mut params = vec![0.0; NUM_CLASSES * (d + 1)];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        fill_uniform(&mut rng, &mut params, 1.0 / (d as f64).sqrt());
        LinearModel {
            input_channels,
            seq_len,
            num_classes: NUM_CLASSES,
            params,
        }
    }

    fn d(&self) -> usize {
        self.input_channels * self.seq_len
    }

    fn check(&self, fm: &FeatureMatrix) -> Result<()> {
        check_channels(self.input_channels, fm)?;
        if fm.rows != self.seq_len {
            return Err(Error::dims(format!("{} rows", self.seq_len), format!("{} rows", fm.rows)));
        }
        Ok(())
    }
}

impl Network for LinearModel {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn input_channels(&self) -> usize {
        self.input_channels
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn logits(&self, fm: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check(fm)?;
        let d = self.d();
        let bias = self.num_classes * d;
        Ok((0..self.num_classes)
            .map(|c| self.params[bias + c] + dot(&self.params[c * d..(c + 1) * d], &fm.values))
            .collect())
    }

    fn loss_and_grad(&self, fm: &FeatureMatrix, label: usize, grad: &mut [f64]) -> Result<f64> {
        check_label(label, self.num_classes)?;
        let logits = self.logits(fm)?;
        let d = self.d();
        let mut dlog = vec![0.0; self.num_classes];
        let loss = softmax_xent_grad(&logits, label, &mut dlog);
        for (c, &g) in dlog.iter().enumerate() {
            axpy(g, &fm.values, &mut grad[c * d..(c + 1) * d]);
            grad[self.num_classes * d + c] += g;
        }
        Ok(loss)
    }
}
