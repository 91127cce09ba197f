//! Small numeric kernels shared by the networks.

/// Probability floor applied before taking the log in [`cross_entropy`].
pub const PROB_FLOOR: f64 = 1e-12;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// `−ln p[label]` with `p` clamped at [`PROB_FLOOR`]. NaN stays NaN.
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    let p = probs[label];
    -(if p < PROB_FLOOR { PROB_FLOOR } else { p }).ln()
}

/// Cross-entropy of `softmax(logits)`; writes `∂loss/∂logits` into `grad`.
pub(crate) fn softmax_xent_grad(logits: &[f64], label: usize, grad: &mut [f64]) -> f64 {
    let p = softmax(logits);
    for (g, (k, pk)) in grad.iter_mut().zip(p.iter().enumerate()) {
        *g = pk - if k == label { 1.0 } else { 0.0 };
    }
    cross_entropy(&p, label)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Dot product with four independent accumulators; summation order is
/// fixed so results are reproducible bit for bit.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_softmax() {
        assert_eq!(softmax(&[0.0; 4]), vec![0.25; 4]);
    }

    #[test]
    fn softmax_shift_invariance() {
        let z = [0.3, -1.2, 2.5, 0.0];
        let shifted: Vec<f64> = z.iter().map(|v| v + 17.25).collect();
        for (a, b) in softmax(&z).iter().zip(softmax(&shifted)) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((softmax(&z).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_large_logit_is_stable() {
        // exact values: e^-1000 underflows to 0 and 1/(1 + 3e^-1000) rounds to 1
        let p = softmax(&[1000.0, 0.0, 0.0, 0.0]);
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!(p[1..].iter().all(|&v| (0.0..1e-12).contains(&v)));
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn cross_entropy_values() {
        assert!((cross_entropy(&[0.25; 4], 2) - 4f64.ln()).abs() < 1e-15);
        assert!((cross_entropy(&[0.25; 4], 2) - 1.3863).abs() < 1e-4);
        assert_eq!(cross_entropy(&[0.0, 1.0, 0.0, 0.0], 1), 0.0);
        let clamped = cross_entropy(&[1.0, 0.0, 0.0, 0.0], 3);
        assert!((clamped - 27.631_021_115_928_547).abs() < 1e-9);
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..11).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_is_symmetric() {
        for x in [-30.0, -1.0, 0.0, 2.0, 40.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
