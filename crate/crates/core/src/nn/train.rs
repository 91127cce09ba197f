use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Network;
use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;

/// Samples per gradient work unit. Fixed so that the summation order, and
/// therefore the trained weights, do not depend on the thread count.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            epochs: 100,
            batch_size: 32,
            seed: 0,
            optimizer: Optimizer::adam(),
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidParameter(format!("learning rate {}", self.lr)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter("epochs and batch size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Trained<N> {
    pub model: N,
    /// Mean training loss of every epoch.
    pub loss_curve: Vec<f64>,
}

impl<N> Trained<N> {
    /// `epoch,mean_loss` rows, epochs counted from 1.
    pub fn loss_curve_csv(&self) -> String {
        let mut s = String::from("epoch,mean_loss\n");
        for (i, l) in self.loss_curve.iter().enumerate() {
            s.push_str(&format!("{},{}\n", i + 1, l));
        }
        s
    }
}

/// Mini-batch training of mean cross-entropy with a seeded shuffle, using
/// each matrix's compliance label as the target.
pub fn train<N: Network>(model: N, data: &[FeatureMatrix], cfg: &TrainConfig) -> Result<Trained<N>> {
    let labels = data
        .iter()
        .map(|fm| {
            fm.label
                .map(|l| l.index())
                .ok_or_else(|| Error::InvalidParameter("training matrix without label".into()))
        })
        .collect::<Result<Vec<usize>>>()?;
    train_labeled(model, data, &labels, cfg)
}

/// [`train`] with explicit target indices in `0..model.num_classes()`.
pub fn train_labeled<N: Network>(
    model: N,
    data: &[FeatureMatrix],
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<Trained<N>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if labels.len() != data.len() {
        return Err(Error::dims(format!("{} labels", data.len()), labels.len()));
    }
    for (fm, &l) in data.iter().zip(labels) {
        if fm.cols() != model.input_channels() {
            return Err(Error::dims(
                format!("{} channels", model.input_channels()),
                format!("{} channels", fm.cols()),
            ));
        }
        super::check_label(l, model.num_classes())?;
    }

    let mut model = model;
    let n_params = model.params().len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut m = vec![0.0; n_params];
    let mut v = vec![0.0; n_params];
    let mut step = 0i32;
    let mut curve = Vec::with_capacity(cfg.epochs);

    // Per-sample losses, summed in index order so the epoch mean does not
    // depend on the shuffle.
    let mut losses = vec![0.0; data.len()];
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (bi, batch) in order.chunks(cfg.batch_size).enumerate() {
            let net = &model;
            let parts = batch
                .par_chunks(GRAD_CHUNK)
                .map(|chunk| {
                    let mut g = vec![0.0; n_params];
                    let mut ls = Vec::with_capacity(chunk.len());
                    for &i in chunk {
                        ls.push((i, net.loss_and_grad(&data[i], labels[i], &mut g)?));
                    }
                    Ok((ls, g))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut grad = vec![0.0; n_params];
            let mut batch_finite = true;
            for (ls, g) in parts {
                for (i, l) in ls {
                    batch_finite &= l.is_finite();
                    losses[i] = l;
                }
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b;
                }
            }
            if !batch_finite {
                return Err(Error::NonFiniteLoss { epoch: epoch + 1, batch: bi + 1 });
            }
            let scale = 1.0 / batch.len() as f64;
            step += 1;
            let params = model.params_mut();
            match cfg.optimizer {
                Optimizer::Sgd => {
                    for (p, g) in params.iter_mut().zip(&grad) {
                        *p -= cfg.lr * g * scale;
                    }
                }
                Optimizer::Adam { beta1, beta2, eps } => {
                    let c1 = 1.0 - beta1.powi(step);
                    let c2 = 1.0 - beta2.powi(step);
                    for i in 0..n_params {
                        let g = grad[i] * scale;
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                        params[i] -= cfg.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                    }
                }
            }
        }
        curve.push(losses.iter().sum::<f64>() / data.len() as f64);
    }
    Ok(Trained {
        model,
        loss_curve: curve,
    })
}
