use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Network;
use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;

/// Minimum number of parameters compared by [`grad_check`].
pub const MIN_CHECKED: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Parameter index where the worst error occurred.
    pub worst: usize,
    pub checked: usize,
}

/// Compares the analytic gradient with central differences
/// `(f(θ+ε) − f(θ−ε)) / 2ε` on a random subset of at least 200 parameters
/// (or all of them, if fewer). Relative error uses the denominator
/// `max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check<N: Network>(
    model: &N,
    sample: &FeatureMatrix,
    label: usize,
    eps: f64,
    count: usize,
    seed: u64,
) -> Result<GradCheck> {
    if !(1e-6..=1e-4).contains(&eps) {
        return Err(Error::InvalidParameter(format!("eps {eps} outside [1e-6, 1e-4]")));
    }
    let total = model.params().len();
    let mut analytic = vec![0.0; total];
    model.loss_and_grad(sample, label, &mut analytic)?;

    let count = count.max(MIN_CHECKED).min(total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = rand::seq::index::sample(&mut rng, total, count).into_vec();
    indices.sort_unstable();

    let mut probe = model.clone();
    let mut result = GradCheck {
        max_rel_error: 0.0,
        worst: indices.first().copied().unwrap_or(0),
        checked: indices.len(),
    };
    for &i in &indices {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + eps;
        let up = probe.loss(sample, label)?;
        probe.params_mut()[i] = orig - eps;
        let down = probe.loss(sample, label)?;
        probe.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if rel > result.max_rel_error {
            result.max_rel_error = rel;
            result.worst = i;
        }
    }
    Ok(result)
}
