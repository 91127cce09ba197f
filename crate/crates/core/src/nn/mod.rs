//! Neural classifiers with hand-written backpropagation.
//!
//! Every network keeps its parameters in one flat `Vec<f64>` so that the
//! optimizers, the gradient checker and serialization all see the same
//! layout. All arithmetic is double precision.

mod gradcheck;
mod linear;
mod lstm;
pub mod ops;
mod tcn;
mod train;

pub use gradcheck::{grad_check, GradCheck};
pub use linear::LinearModel;
pub use lstm::{LstmConfig, LstmModel, LstmState};
pub use ops::{cross_entropy, softmax};
pub use tcn::{TcnConfig, TcnModel};
pub use train::{train, train_labeled, Optimizer, TrainConfig, Trained};

use rand::Rng;

use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;

/// A differentiable classifier over feature matrices.
pub trait Network: Clone + Send + Sync {
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn input_channels(&self) -> usize;
    fn num_classes(&self) -> usize;

    fn logits(&self, fm: &FeatureMatrix) -> Result<Vec<f64>>;

    /// Training loss for one labeled sample.
    fn loss(&self, fm: &FeatureMatrix, label: usize) -> Result<f64> {
        let p = softmax(&self.logits(fm)?);
        Ok(cross_entropy(&p, label))
    }

    /// Training loss; adds `∂loss/∂params` into `grad`.
    fn loss_and_grad(&self, fm: &FeatureMatrix, label: usize, grad: &mut [f64]) -> Result<f64>;

    fn predict(&self, fm: &FeatureMatrix) -> Result<usize> {
        Ok(crate::hmm::argmax(&self.logits(fm)?))
    }
}

pub(crate) fn check_channels(expected: usize, fm: &FeatureMatrix) -> Result<()> {
    if fm.cols() != expected {
        return Err(Error::dims(
            format!("{expected} channels"),
            format!("{} channels", fm.cols()),
        ));
    }
    if fm.rows == 0 {
        return Err(Error::dims("at least 1 row", 0));
    }
    Ok(())
}

pub(crate) fn check_label(label: usize, classes: usize) -> Result<()> {
    if label >= classes {
        return Err(Error::InvalidParameter(format!("label {label} out of range")));
    }
    Ok(())
}

pub(crate) fn fill_uniform(rng: &mut impl Rng, out: &mut [f64], bound: f64) {
    for v in out {
        *v = rng.random_range(-bound..bound);
    }
}
