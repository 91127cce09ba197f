//! Gaussian-emission hidden Markov models, one per compliance class.
//!
//! Emissions are diagonal-covariance Gaussians. All recursions run in log
//! space; the variance floor keeps every emission density finite.
//! Classification picks the class whose model gives the observation the
//! highest likelihood.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;
use crate::trial::{ComplianceClass, NUM_CLASSES};

pub const VARIANCE_FLOOR: f64 = 1e-6;
const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmModel {
    #[serde(rename = "K")]
    pub n_states: usize,
    /// Row-major `K × K` transition matrix.
    #[serde(rename = "A")]
    pub transitions: Vec<f64>,
    #[serde(rename = "pi")]
    pub initial: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub channel_names: Vec<String>,
}

impl HmmModel {
    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.transitions[from * self.n_states + to]
    }

    /// Checks stochasticity, shapes and the variance floor.
    pub fn validate(&self) -> Result<()> {
        let k = self.n_states;
        let f = self.dim();
        let bad = |what: &str| Err(Error::InvalidParameter(format!("hmm: {what}")));
        if k == 0 || self.transitions.len() != k * k || self.initial.len() != k {
            return bad("shape");
        }
        if self.means.len() != k
            || self.variances.len() != k
            || self.means.iter().chain(&self.variances).any(|v| v.len() != f)
        {
            return bad("emission shape");
        }
        for row in self.transitions.chunks(k) {
            if row.iter().any(|&p| !(p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad("transition row not stochastic");
            }
        }
        if self.initial.iter().any(|&p| !(p >= 0.0))
            || (self.initial.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad("initial distribution not stochastic");
        }
        if self.variances.iter().flatten().any(|&v| !(v >= VARIANCE_FLOOR)) {
            return bad("variance below floor");
        }
        Ok(())
    }

    fn log_emission(&self, state: usize, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((xi, m), v) in x.iter().zip(&self.means[state]).zip(&self.variances[state]) {
            let d = xi - m;
            acc -= 0.5 * (LN_2PI + v.ln() + d * d / v);
        }
        acc
    }

    /// `T × K` table of log emission densities.
    fn log_emissions(&self, obs: &FeatureMatrix) -> Vec<f64> {
        let k = self.n_states;
        let mut out = vec![0.0; obs.rows * k];
        for t in 0..obs.rows {
            let x = obs.row(t);
            for s in 0..k {
                out[t * k + s] = self.log_emission(s, x);
            }
        }
        out
    }

    fn check_obs(&self, obs: &FeatureMatrix) -> Result<()> {
        if obs.cols() != self.dim() {
            return Err(Error::dims(
                format!("{} channels", self.dim()),
                format!("{} channels", obs.cols()),
            ));
        }
        if obs.rows == 0 {
            return Err(Error::dims("at least 1 row", 0));
        }
        Ok(())
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Log forward variables, `T × K`.
fn forward(model: &HmmModel, log_b: &[f64], rows: usize) -> Vec<f64> {
    let k = model.n_states;
    let log_a: Vec<f64> = model.transitions.iter().map(|&p| ln(p)).collect();
    let mut alpha = vec![0.0; rows * k];
    for s in 0..k {
        alpha[s] = ln(model.initial[s]) + log_b[s];
    }
    for t in 1..rows {
        for j in 0..k {
            let prev = &alpha[(t - 1) * k..t * k];
            let lse = log_sum_exp((0..k).map(|i| prev[i] + log_a[i * k + j]));
            alpha[t * k + j] = lse + log_b[t * k + j];
        }
    }
    alpha
}

/// Log backward variables, `T × K`.
fn backward(model: &HmmModel, log_b: &[f64], rows: usize) -> Vec<f64> {
    let k = model.n_states;
    let log_a: Vec<f64> = model.transitions.iter().map(|&p| ln(p)).collect();
    let mut beta = vec![0.0; rows * k];
    for t in (0..rows.saturating_sub(1)).rev() {
        for i in 0..k {
            beta[t * k + i] = log_sum_exp(
                (0..k).map(|j| log_a[i * k + j] + log_b[(t + 1) * k + j] + beta[(t + 1) * k + j]),
            );
        }
    }
    beta
}

/// `log P(obs | model)` by the forward recursion.
pub fn forward_loglik(model: &HmmModel, obs: &FeatureMatrix) -> Result<f64> {
    model.check_obs(obs)?;
    let log_b = model.log_emissions(obs);
    let alpha = forward(model, &log_b, obs.rows);
    let k = model.n_states;
    Ok(log_sum_exp(alpha[(obs.rows - 1) * k..].iter().copied()))
}

/// Baum-Welch settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaumWelch {
    pub n_states: usize,
    pub max_iter: usize,
    /// Stop when the relative change of total log-likelihood drops below this.
    pub tol: f64,
    /// Re-estimate the initial distribution instead of keeping it uniform.
    pub reestimate_initial: bool,
}

impl Default for BaumWelch {
    fn default() -> Self {
        BaumWelch {
            n_states: 3,
            max_iter: 100,
            tol: 1e-4,
            reestimate_initial: false,
        }
    }
}

/// Result of a Baum-Welch run. `loglik[i]` is the total training
/// log-likelihood of the model after `i` updates; the last entry belongs to
/// the returned model.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub model: HmmModel,
    pub loglik: Vec<f64>,
}

impl BaumWelch {
    pub fn with_states(n_states: usize) -> Self {
        BaumWelch {
            n_states,
            ..Self::default()
        }
    }

    /// Deterministic starting point: each sequence is cut into `K`
    /// contiguous blocks and block `s` seeds state `s`; transitions start at
    /// 0.8 self-probability with the rest spread evenly.
    pub fn initial_model(&self, seqs: &[FeatureMatrix]) -> Result<HmmModel> {
        let (k, f) = self.check(seqs)?;
        let mut sums = vec![vec![0.0; f]; k];
        let mut counts = vec![0usize; k];
        for fm in seqs {
            for t in 0..fm.rows {
                let s = t * k / fm.rows;
                for (a, x) in sums[s].iter_mut().zip(fm.row(t)) {
                    *a += x;
                }
                counts[s] += 1;
            }
        }
        let total: usize = counts.iter().sum();
        let global: Vec<f64> = (0..f)
            .map(|d| sums.iter().map(|v| v[d]).sum::<f64>() / total as f64)
            .collect();
        let means: Vec<Vec<f64>> = (0..k)
            .map(|s| {
                if counts[s] == 0 {
                    global.clone()
                } else {
                    sums[s].iter().map(|a| a / counts[s] as f64).collect()
                }
            })
            .collect();
        let mut sq = vec![vec![0.0; f]; k];
        let mut gsq = vec![0.0; f];
        for fm in seqs {
            for t in 0..fm.rows {
                let s = t * k / fm.rows;
                for (d, x) in fm.row(t).iter().enumerate() {
                    sq[s][d] += (x - means[s][d]).powi(2);
                    gsq[d] += (x - global[d]).powi(2);
                }
            }
        }
        let variances = (0..k)
            .map(|s| {
                (0..f)
                    .map(|d| {
                        let v = if counts[s] == 0 {
                            gsq[d] / total as f64
                        } else {
                            sq[s][d] / counts[s] as f64
                        };
                        v.max(VARIANCE_FLOOR)
                    })
                    .collect()
            })
            .collect();
        let mut transitions = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                transitions[i * k + j] = if k == 1 {
                    1.0
                } else if i == j {
                    0.8
                } else {
                    0.2 / (k - 1) as f64
                };
            }
        }
        Ok(HmmModel {
            n_states: k,
            transitions,
            initial: vec![1.0 / k as f64; k],
            means,
            variances,
            channel_names: seqs[0].channel_names.clone(),
        })
    }

    fn check(&self, seqs: &[FeatureMatrix]) -> Result<(usize, usize)> {
        let first = seqs.first().ok_or(Error::EmptyTrainingSet)?;
        if self.n_states == 0 {
            return Err(Error::InvalidParameter("state count must be >= 1".into()));
        }
        let f = first.cols();
        for fm in seqs {
            if fm.cols() != f {
                return Err(Error::dims(format!("{f} channels"), format!("{} channels", fm.cols())));
            }
            if fm.rows == 0 {
                return Err(Error::dims("at least 1 row", 0));
            }
        }
        Ok((self.n_states, f))
    }

    pub fn fit(&self, seqs: &[FeatureMatrix]) -> Result<Fitted> {
        let init = self.initial_model(seqs)?;
        self.fit_from(init, seqs)
    }

    /// Runs EM starting from `init`.
    pub fn fit_from(&self, init: HmmModel, seqs: &[FeatureMatrix]) -> Result<Fitted> {
        self.check(seqs)?;
        let mut model = init;
        let mut loglik: Vec<f64> = Vec::new();
        for _ in 0..self.max_iter {
            let (next, ll) = self.step(&model, seqs)?;
            if let Some(&prev) = loglik.last() {
                if (ll - prev).abs() <= self.tol * f64::abs(prev) {
                    loglik.push(ll);
                    return Ok(Fitted { model, loglik });
                }
            }
            loglik.push(ll);
            model = next;
        }
        let ll = total_loglik(&model, seqs)?;
        loglik.push(ll);
        Ok(Fitted { model, loglik })
    }

    /// One EM update. Returns the updated model and the total
    /// log-likelihood of the *input* model.
    pub fn step(&self, model: &HmmModel, seqs: &[FeatureMatrix]) -> Result<(HmmModel, f64)> {
        let (k, f) = self.check(seqs)?;
        if model.n_states != k || model.dim() != f {
            return Err(Error::dims(
                format!("{k} states x {f} channels"),
                format!("{} states x {} channels", model.n_states, model.dim()),
            ));
        }
        let log_a: Vec<f64> = model.transitions.iter().map(|&p| ln(p)).collect();
        let mut total_ll = 0.0;
        let mut xi_sum = vec![0.0; k * k];
        let mut first_sum = vec![0.0; k];
        let mut occ = vec![0.0; k];
        let mut mean_acc = vec![vec![0.0; f]; k];
        let mut gammas: Vec<Vec<f64>> = Vec::with_capacity(seqs.len());

        for fm in seqs {
            let rows = fm.rows;
            let log_b = model.log_emissions(fm);
            let alpha = forward(model, &log_b, rows);
            let beta = backward(model, &log_b, rows);
            let ll = log_sum_exp(alpha[(rows - 1) * k..].iter().copied());
            total_ll += ll;

            let mut gamma = vec![0.0; rows * k];
            for t in 0..rows {
                for s in 0..k {
                    let g = (alpha[t * k + s] + beta[t * k + s] - ll).exp();
                    gamma[t * k + s] = g;
                    occ[s] += g;
                    for (a, x) in mean_acc[s].iter_mut().zip(fm.row(t)) {
                        *a += g * x;
                    }
                }
            }
            for s in 0..k {
                first_sum[s] += gamma[s];
            }
            for t in 0..rows.saturating_sub(1) {
                for i in 0..k {
                    for j in 0..k {
                        xi_sum[i * k + j] += (alpha[t * k + i]
                            + log_a[i * k + j]
                            + log_b[(t + 1) * k + j]
                            + beta[(t + 1) * k + j]
                            - ll)
                            .exp();
                    }
                }
            }
            gammas.push(gamma);
        }

        let mut next = model.clone();
        for i in 0..k {
            let row = &xi_sum[i * k..(i + 1) * k];
            let z: f64 = row.iter().sum();
            if z > 0.0 {
                for j in 0..k {
                    next.transitions[i * k + j] = row[j] / z;
                }
            }
        }
        if self.reestimate_initial {
            let z: f64 = first_sum.iter().sum();
            next.initial = first_sum.iter().map(|v| v / z).collect();
        }
        for s in 0..k {
            if occ[s] > 0.0 {
                next.means[s] = mean_acc[s].iter().map(|a| a / occ[s]).collect();
            }
        }
        let mut var_acc = vec![vec![0.0; f]; k];
        for (fm, gamma) in seqs.iter().zip(&gammas) {
            for t in 0..fm.rows {
                for s in 0..k {
                    let g = gamma[t * k + s];
                    for (d, x) in fm.row(t).iter().enumerate() {
                        var_acc[s][d] += g * (x - next.means[s][d]).powi(2);
                    }
                }
            }
        }
        for s in 0..k {
            if occ[s] > 0.0 {
                next.variances[s] = var_acc[s]
                    .iter()
                    .map(|a| (a / occ[s]).max(VARIANCE_FLOOR))
                    .collect();
            }
        }
        Ok((next, total_ll))
    }
}

/// Sum of [`forward_loglik`] over a training set.
pub fn total_loglik(model: &HmmModel, seqs: &[FeatureMatrix]) -> Result<f64> {
    seqs.iter().map(|fm| forward_loglik(model, fm)).sum()
}

/// One model per compliance class, in [`ComplianceClass::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmClassifier {
    pub models: Vec<HmmModel>,
}

impl HmmClassifier {
    pub fn model(&self, class: ComplianceClass) -> &HmmModel {
        &self.models[class.index()]
    }
}

/// Trains one HMM per class on that class's labeled matrices.
pub fn train_hmm_classifier(train: &[FeatureMatrix], bw: &BaumWelch) -> Result<HmmClassifier> {
    let mut by_class: Vec<Vec<FeatureMatrix>> = vec![Vec::new(); NUM_CLASSES];
    for fm in train {
        let label = fm
            .label
            .ok_or_else(|| Error::InvalidParameter("training matrix without label".into()))?;
        by_class[label.index()].push(fm.clone());
    }
    for class in ComplianceClass::ALL {
        if by_class[class.index()].is_empty() {
            return Err(Error::MissingClass(class));
        }
    }
    let models = by_class
        .par_iter()
        .map(|seqs| bw.fit(seqs).map(|f| f.model))
        .collect::<Result<Vec<_>>>()?;
    Ok(HmmClassifier { models })
}

/// Maximum-likelihood class; ties go to the earlier class in fixed order.
pub fn classify_hmm(
    clf: &HmmClassifier,
    obs: &FeatureMatrix,
) -> Result<(ComplianceClass, [f64; NUM_CLASSES])> {
    let mut scores = [0.0; NUM_CLASSES];
    for (s, m) in scores.iter_mut().zip(&clf.models) {
        *s = forward_loglik(m, obs)?;
    }
    Ok((ComplianceClass::ALL[argmax(&scores)], scores))
}

/// Index of the first maximum.
pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        let f = rows[0].len();
        let names = (0..f).map(|i| format!("c{i}")).collect();
        FeatureMatrix::new(rows.len(), names, rows.concat()).unwrap()
    }

    fn random_stochastic(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let z: f64 = v.iter().sum();
        v.into_iter().map(|x| x / z).collect()
    }

    pub(crate) fn random_model(rng: &mut ChaCha8Rng, k: usize, f: usize, min_var: f64) -> HmmModel {
        HmmModel {
            n_states: k,
            transitions: (0..k).flat_map(|_| random_stochastic(rng, k)).collect(),
            initial: random_stochastic(rng, k),
            means: (0..k).map(|_| (0..f).map(|_| rng.random_range(-2.0..2.0)).collect()).collect(),
            variances: (0..k)
                .map(|_| (0..f).map(|_| rng.random_range(min_var..min_var + 2.0)).collect())
                .collect(),
            channel_names: (0..f).map(|i| format!("c{i}")).collect(),
        }
    }

    fn gauss_density(x: &[f64], m: &[f64], v: &[f64]) -> f64 {
        x.iter()
            .zip(m)
            .zip(v)
            .map(|((x, m), v)| (-(x - m).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt())
            .product()
    }

    /// Sum over every state path of π·A·…·b products.
    fn brute_force(model: &HmmModel, obs: &FeatureMatrix) -> f64 {
        let k = model.n_states;
        let t = obs.rows;
        let mut total = 0.0;
        for code in 0..k.pow(t as u32) {
            let path: Vec<usize> = (0..t).map(|i| code / k.pow(i as u32) % k).collect();
            let mut p = model.initial[path[0]];
            for i in 0..t {
                if i > 0 {
                    p *= model.transition(path[i - 1], path[i]);
                }
                p *= gauss_density(obs.row(i), &model.means[path[i]], &model.variances[path[i]]);
            }
            total += p;
        }
        total.ln()
    }

    #[test]
    fn single_standard_gaussian() {
        let m = HmmModel {
            n_states: 1,
            transitions: vec![1.0],
            initial: vec![1.0],
            means: vec![vec![0.0, 0.0]],
            variances: vec![vec![1.0, 1.0]],
            channel_names: vec!["a".into(), "b".into()],
        };
        let ll = forward_loglik(&m, &matrix(vec![vec![0.0, 0.0]])).unwrap();
        let expected = 2.0 * (1.0 / (2.0 * std::f64::consts::PI).sqrt()).ln();
        assert!((ll - expected).abs() < 1e-14);
    }

    #[test]
    fn forward_matches_path_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = random_model(&mut rng, 2, 2, 0.3);
            let obs = matrix((0..3).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect());
            let a = forward_loglik(&m, &obs).unwrap();
            let b = brute_force(&m, &obs);
            assert!(((a - b) / b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn appending_rows_never_increases_loglik() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let min_var = 1.0 / (2.0 * std::f64::consts::PI);
        for _ in 0..50 {
            let k = rng.random_range(1..4);
            let m = random_model(&mut rng, k, 2, min_var);
            let rows: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
            let mut prev = f64::INFINITY;
            for t in 1..=rows.len() {
                let ll = forward_loglik(&m, &matrix(rows[..t].to_vec())).unwrap();
                assert!(ll <= prev + 1e-12);
                prev = ll;
            }
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = random_model(&mut rng, 2, 3, 0.5);
        assert!(matches!(
            forward_loglik(&m, &matrix(vec![vec![0.0, 1.0]])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_state_recovers_pooled_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let seqs: Vec<FeatureMatrix> = (0..5)
            .map(|_| matrix((0..10).map(|_| vec![rng.random_range(-1.0..4.0), rng.random_range(0.0..1.0)]).collect()))
            .collect();
        let fit = BaumWelch::with_states(1).fit(&seqs).unwrap();
        let all: Vec<&[f64]> = seqs.iter().flat_map(|s| (0..s.rows).map(move |r| s.row(r))).collect();
        for d in 0..2 {
            let n = all.len() as f64;
            let mean = all.iter().map(|r| r[d]).sum::<f64>() / n;
            let var = all.iter().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / n;
            assert!((fit.model.means[0][d] - mean).abs() < 1e-10);
            assert!((fit.model.variances[0][d] - var).abs() < 1e-10);
        }
    }

    #[test]
    fn recovers_two_state_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let seqs: Vec<FeatureMatrix> = (0..20)
            .map(|_| {
                let switch = rng.random_range(10..30);
                matrix(
                    (0..40)
                        .map(|t| {
                            let base = if t < switch { 0.0 } else { 5.0 };
                            vec![base + rng.random_range(-0.1..0.1)]
                        })
                        .collect(),
                )
            })
            .collect();
        let fit = BaumWelch::with_states(2).fit(&seqs).unwrap();
        let mut means: Vec<f64> = fit.model.means.iter().map(|m| m[0]).collect();
        means.sort_by(f64::total_cmp);
        assert!(means[0].abs() < 0.05, "{means:?}");
        assert!((means[1] - 5.0).abs() < 0.05, "{means:?}");
    }

    #[test]
    fn em_is_monotone_and_keeps_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let seqs: Vec<FeatureMatrix> = (0..6)
            .map(|_| matrix((0..15).map(|t| vec![(t as f64 * 0.3).sin() + rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0)]).collect()))
            .collect();
        let bw = BaumWelch { n_states: 3, max_iter: 30, tol: 0.0, reestimate_initial: false };
        let mut model = random_model(&mut rng, 3, 2, 0.2);
        model.initial = vec![1.0 / 3.0; 3];
        let mut prev = f64::NEG_INFINITY;
        for _ in 0..30 {
            let (next, ll) = bw.step(&model, &seqs).unwrap();
            assert!((ll - total_loglik(&model, &seqs).unwrap()).abs() < 1e-9);
            assert!(ll >= prev - 1e-8, "{ll} < {prev}");
            next.validate().unwrap();
            assert_eq!(next.initial, vec![1.0 / 3.0; 3]);
            prev = ll;
            model = next;
        }
    }

    #[test]
    fn empty_and_mismatched_training_sets() {
        assert!(matches!(BaumWelch::default().fit(&[]), Err(Error::EmptyTrainingSet)));
        let a = matrix(vec![vec![0.0, 1.0]]);
        let b = matrix(vec![vec![0.0]]);
        assert!(matches!(BaumWelch::default().fit(&[a, b]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn classifier_needs_every_class() {
        let train: Vec<FeatureMatrix> = ComplianceClass::ALL[..3]
            .iter()
            .map(|&c| matrix(vec![vec![c.index() as f64], vec![1.0]]).with_label(c))
            .collect();
        assert!(matches!(
            train_hmm_classifier(&train, &BaumWelch::default()),
            Err(Error::MissingClass(ComplianceClass::Soft))
        ));
    }

    #[test]
    fn minimal_training_and_dominant_class() {
        let train: Vec<FeatureMatrix> = ComplianceClass::ALL
            .iter()
            .map(|&c| matrix((0..6).map(|t| vec![10.0 * c.index() as f64 + 0.1 * t as f64]).collect()).with_label(c))
            .collect();
        let clf = train_hmm_classifier(&train, &BaumWelch::with_states(2)).unwrap();
        assert_eq!(clf.models.len(), 4);
        let obs = matrix(vec![vec![20.2]; 5]);
        assert_eq!(classify_hmm(&clf, &obs).unwrap().0, ComplianceClass::Medium);
    }

    #[test]
    fn identical_models_tie_to_hard_skin() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_model(&mut rng, 3, 2, 0.5);
        let clf = HmmClassifier { models: vec![m; 4] };
        let (c, scores) = classify_hmm(&clf, &matrix(vec![vec![0.3, 0.1]])).unwrap();
        assert_eq!(c, ComplianceClass::HardSkin);
        assert!(scores.iter().all(|&s| s == scores[0]));
    }

    #[test]
    fn argmax_invariant_to_shift() {
        let s = [-3.0, 4.5, 4.5, 1.0];
        let shifted: Vec<f64> = s.iter().map(|x| x + 1234.5).collect();
        assert_eq!(argmax(&s), argmax(&shifted));
        assert_eq!(argmax(&s), 1);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_model(&mut rng, 3, 4, 0.1);
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"K\":3") && json.contains("\"A\":") && json.contains("\"pi\":"));
        let back: HmmModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
