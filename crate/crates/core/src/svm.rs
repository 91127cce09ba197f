//! Linear one-vs-rest SVM over flattened feature matrices.
//!
//! Each class gets a binary hinge-loss problem
//! `(1/n)·Σ max(0, 1 − y·(w·x + b)) + (λ/2)·‖(w, b)‖²` with `λ = 1/(C·n)`,
//! solved by stochastic subgradient descent with step `1/(λ·t)` over a
//! seeded shuffle of the training set. The bias is carried as the weight of
//! a constant input and is regularized along with `w`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::argmax;
use crate::preprocess::FeatureMatrix;
use crate::trial::{ComplianceClass, NUM_CLASSES};

/// Concatenates channels: element `rows·j + i` is `fm[i][j]`.
pub fn flatten(fm: &FeatureMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(fm.values.len());
    for j in 0..fm.cols() {
        out.extend((0..fm.rows).map(|i| fm.get(i, j)));
    }
    out
}

/// Inverse of [`flatten`].
pub fn unflatten(v: &[f64], rows: usize, channel_names: Vec<String>) -> Result<FeatureMatrix> {
    let cols = channel_names.len();
    if v.len() != rows * cols {
        return Err(Error::dims(rows * cols, v.len()));
    }
    let mut values = vec![0.0; v.len()];
    for j in 0..cols {
        for i in 0..rows {
            values[i * cols + j] = v[rows * j + i];
        }
    }
    FeatureMatrix::new(rows, channel_names, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            epochs: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// One weight vector per class, in [`ComplianceClass::ALL`] order.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(default)]
    pub channel_names: Vec<String>,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn scores(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        if x.len() != self.dim() {
            return Err(Error::dims(self.dim(), x.len()));
        }
        let mut s = [0.0; NUM_CLASSES];
        for (k, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            s[k] = dot(w, x) + b;
        }
        Ok(s)
    }
}

/// A trained model plus the full-batch objective of every class after every epoch.
#[derive(Debug, Clone)]
pub struct SvmFit {
    pub model: SvmModel,
    pub objective: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Regularized hinge objective of one binary problem.
pub fn objective(w: &[f64], b: f64, xs: &[Vec<f64>], ys: &[f64], c: f64) -> f64 {
    let n = xs.len() as f64;
    let lambda = 1.0 / (c * n);
    let hinge: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (1.0 - y * (dot(w, x) + b)).max(0.0))
        .sum();
    hinge / n + 0.5 * lambda * (dot(w, w) + b * b)
}

pub fn train_svm(xs: &[Vec<f64>], ys: &[ComplianceClass], params: &SvmParams) -> Result<SvmFit> {
    if xs.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if xs.len() != ys.len() {
        return Err(Error::dims(xs.len(), ys.len()));
    }
    if !(params.c > 0.0) {
        return Err(Error::InvalidParameter(format!("C = {}", params.c)));
    }
    let d = xs[0].len();
    if let Some(x) = xs.iter().find(|x| x.len() != d) {
        return Err(Error::dims(d, x.len()));
    }
    let mut present = [false; NUM_CLASSES];
    for y in ys {
        present[y.index()] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::SingleClassData);
    }

    let mut weights = Vec::with_capacity(NUM_CLASSES);
    let mut biases = Vec::with_capacity(NUM_CLASSES);
    let mut objectives = Vec::with_capacity(NUM_CLASSES);
    for class in ComplianceClass::ALL {
        let signs: Vec<f64> = ys.iter().map(|&y| if y == class { 1.0 } else { -1.0 }).collect();
        let seed = params.seed.wrapping_add(class.index() as u64);
        let (w, b, obj) = train_binary(xs, &signs, params.c, params.epochs, seed);
        weights.push(w);
        biases.push(b);
        objectives.push(obj);
    }
    Ok(SvmFit {
        model: SvmModel {
            weights,
            biases,
            c: params.c,
            channel_names: Vec::new(),
        },
        objective: objectives,
    })
}

fn train_binary(
    xs: &[Vec<f64>],
    ys: &[f64],
    c: f64,
    epochs: usize,
    seed: u64,
) -> (Vec<f64>, f64, Vec<f64>) {
    let n = xs.len();
    let lambda = 1.0 / (c * n as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut w = vec![0.0; xs[0].len()];
    let mut b = 0.0;
    let mut t = 0u64;
    let mut trace = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let margin = ys[i] * (dot(&w, &xs[i]) + b);
            let shrink = 1.0 - eta * lambda;
            for wj in w.iter_mut() {
                *wj *= shrink;
            }
            b *= shrink;
            if margin < 1.0 {
                let step = eta * ys[i];
                for (wj, xj) in w.iter_mut().zip(&xs[i]) {
                    *wj += step * xj;
                }
                b += step;
            }
        }
        trace.push(objective(&w, b, xs, ys, c));
    }
    (w, b, trace)
}

/// Highest one-vs-rest score; ties go to the earlier class.
pub fn predict_svm(model: &SvmModel, x: &[f64]) -> Result<(ComplianceClass, [f64; NUM_CLASSES])> {
    let s = model.scores(x)?;
    Ok((ComplianceClass::ALL[argmax(&s)], s))
}
