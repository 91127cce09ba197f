//! One-way ANOVA, Tukey's HSD and Welch's t-test.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Floor applied to each sample variance in the t-test.
pub const T_VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anova {
    pub f: f64,
    pub p: f64,
    pub df_between: f64,
    pub df_within: f64,
    pub ss_between: f64,
    pub ss_within: f64,
    /// Every sample was equal; `f = 0` and `p = 1` by convention.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyPair {
    pub i: usize,
    pub j: usize,
    /// `mean_j − mean_i`.
    pub mean_diff: f64,
    pub q: f64,
    pub p: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    /// Both samples were constant and equal; `t = 0` and `p = 1`.
    pub degenerate: bool,
}

fn check_groups(groups: &[Vec<f64>]) -> Result<()> {
    if groups.len() < 2 {
        return Err(Error::DegenerateGroups(format!("{} groups, need at least 2", groups.len())));
    }
    for (i, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(Error::DegenerateGroups(format!("group {i} has {} samples", g.len())));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateGroups(format!("group {i} has non-finite samples")));
        }
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sum_sq(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m) * (x - m)).sum()
}

/// Survival function of the F distribution.
pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

/// Two-sided tail probability `P(|T| ≥ |t|)` of Student's t.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t))
}

pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<Anova> {
    check_groups(groups)?;
    let n: usize = groups.iter().map(Vec::len).sum();
    let k = groups.len();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = mean(g);
        ssb += g.len() as f64 * (m - grand) * (m - grand);
        ssw += sum_sq(g, m);
    }
    let (d1, d2) = ((k - 1) as f64, (n - k) as f64);
    let mut out = Anova {
        f: 0.0,
        p: 1.0,
        df_between: d1,
        df_within: d2,
        ss_between: ssb,
        ss_within: ssw,
        degenerate: false,
    };
    if ssw == 0.0 {
        if ssb == 0.0 {
            out.degenerate = true;
        } else {
            out.f = f64::INFINITY;
            out.p = 0.0;
        }
        return Ok(out);
    }
    out.f = (ssb / d1) / (ssw / d2);
    out.p = f_sf(out.f, d1, d2);
    Ok(out)
}

/// Pairwise Tukey HSD comparisons for `i < j`, in lexicographic order.
pub fn tukey_hsd(groups: &[Vec<f64>], alpha: f64) -> Result<Vec<TukeyPair>> {
    check_groups(groups)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha}")));
    }
    let k = groups.len();
    let n: usize = groups.iter().map(Vec::len).sum();
    let df = (n - k) as f64;
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let msw = groups.iter().zip(&means).map(|(g, &m)| sum_sq(g, m)).sum::<f64>() / df;
    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            let diff = means[j] - means[i];
            let se = (msw / 2.0 * (1.0 / groups[i].len() as f64 + 1.0 / groups[j].len() as f64)).sqrt();
            let (q, p) = if diff == 0.0 {
                (0.0, 1.0)
            } else if se == 0.0 {
                (f64::INFINITY, 0.0)
            } else {
                let q = diff.abs() / se;
                (q, (1.0 - ptukey(q, k, df)).clamp(0.0, 1.0))
            };
            out.push(TukeyPair {
                i,
                j,
                mean_diff: diff,
                q,
                p,
                significant: p < alpha,
            });
        }
    }
    Ok(out)
}

/// Welch's unequal-variance t-test with Welch–Satterthwaite degrees of
/// freedom; two-sided p. Sample variances are floored at
/// [`T_VARIANCE_FLOOR`].
pub fn ttest_welch(a: &[f64], b: &[f64]) -> Result<TTest> {
    check_groups(&[a.to_vec(), b.to_vec()])?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let va_raw = sum_sq(a, ma) / (na - 1.0);
    let vb_raw = sum_sq(b, mb) / (nb - 1.0);
    if va_raw == 0.0 && vb_raw == 0.0 && ma == mb {
        return Ok(TTest {
            t: 0.0,
            df: na + nb - 2.0,
            p: 1.0,
            degenerate: true,
        });
    }
    let (sa, sb) = (va_raw.max(T_VARIANCE_FLOOR) / na, vb_raw.max(T_VARIANCE_FLOOR) / nb);
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TTest {
        t,
        df,
        p: t_two_sided(t, df),
        degenerate: false,
    })
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn simpson_rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature over `panels` equal sub-intervals.
pub(crate) fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize, tol: f64) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let (x0, x1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
            let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
            simpson_rec(f, x0, x1, f0, fm, f1, whole, tol / panels as f64, 40)
        })
        .sum()
}

/// `P(range of k iid standard normals ≤ w)`.
fn normal_range_cdf(w: f64, k: usize) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let kf = k as f64;
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let g = move |z: f64| {
        let d = norm_cdf(z) - norm_cdf(z - w);
        kf * phi(z) * d.max(0.0).powi(k as i32 - 1)
    };
    integrate(&g, -9.0, 9.0 + w, 24, 1e-11).clamp(0.0, 1.0)
}

/// CDF of the studentized range `Q(k, df)`, by integrating the normal range
/// distribution against the density of `s = sqrt(χ²_df / df)`.
pub fn ptukey(q: f64, k: usize, df: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    if q.is_infinite() {
        return 1.0;
    }
    let half = df / 2.0;
    let log_c = half * df.ln() - ln_gamma(half) - (half - 1.0) * 2f64.ln();
    let density = move |s: f64| {
        if s <= 0.0 {
            return if df == 1.0 { (2.0 / std::f64::consts::PI).sqrt() } else { 0.0 };
        }
        (log_c + (df - 1.0) * s.ln() - df * s * s / 2.0).exp()
    };
    let spread = 10.0 / (2.0 * df).sqrt();
    let lo = (1.0 - spread).max(0.0);
    let hi = 1.0 + spread.max(1.0) * if df < 4.0 { 1.5 } else { 1.0 };
    let f = |s: f64| density(s) * normal_range_cdf(q * s, k);
    integrate(&f, lo, hi, 32, 1e-10).clamp(0.0, 1.0)
}

/// Upper `alpha` critical value of the studentized range, by bisection.
pub fn qtukey(alpha: f64, k: usize, df: f64) -> f64 {
    let target = 1.0 - alpha;
    let (mut lo, mut hi) = (0.0, 1.0);
    while ptukey(hi, k, df) < target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if ptukey(mid, k, df) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// F density integrated from 0 to `f`, with a substitution that removes
    /// the endpoint singularity for small `d1`.
    fn f_sf_oracle(f: f64, d1: f64, d2: f64) -> f64 {
        let ln_b = ln_gamma(d1 / 2.0) + ln_gamma(d2 / 2.0) - ln_gamma((d1 + d2) / 2.0);
        // x = u² maps [0, sqrt(f)] onto [0, f].
        let dens = |u: f64| {
            if u == 0.0 {
                return if d1 == 2.0 { 0.0 } else { 0.0 };
            }
            let x = u * u;
            let ln = 0.5 * d1 * (d1 / d2).ln() + (0.5 * d1 - 1.0) * x.ln()
                - 0.5 * (d1 + d2) * (1.0 + d1 * x / d2).ln()
                - ln_b;
            2.0 * u * ln.exp()
        };
        1.0 - integrate(&dens, 0.0, f.sqrt(), 400, 1e-13)
    }

    fn pooled_t(a: &[f64], b: &[f64]) -> f64 {
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let (ma, mb) = (mean(a), mean(b));
        let sp2 = (sum_sq(a, ma) + sum_sq(b, mb)) / (na + nb - 2.0);
        (ma - mb) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt()
    }

    #[test]
    fn anova_hand_example() {
        let g = vec![
            vec![1.0, 2.0, 3.0, 4.0, 5.0],
            vec![2.0, 3.0, 4.0, 5.0, 6.0],
            vec![3.0, 4.0, 5.0, 6.0, 7.0],
        ];
        let r = anova_oneway(&g).unwrap();
        assert!((r.ss_between - 10.0).abs() < 1e-12);
        assert!((r.ss_within - 30.0).abs() < 1e-12);
        assert_eq!((r.df_between, r.df_within), (2.0, 12.0));
        // (10 / 2) / (30 / 12): the sums of squares fix F at 2.
        assert!((r.f - 2.0).abs() < 1e-12, "{}", r.f);
        assert!((r.p - f_sf_oracle(2.0, 2.0, 12.0)).abs() < 1e-8);
        assert!((r.p - 0.1780).abs() < 1e-3, "{}", r.p);
        // Upper tail at F = 2.5 on the same degrees of freedom.
        assert!((f_sf(2.5, 2.0, 12.0) - 0.124).abs() < 1e-3);
    }

    #[test]
    fn f_survival_matches_quadrature() {
        for &(f, d1, d2) in &[(0.3, 1.0, 5.0), (2.5, 2.0, 12.0), (4.1, 3.0, 20.0), (1.0, 7.0, 9.0), (9.0, 4.0, 40.0)] {
            let a = f_sf(f, d1, d2);
            let b = f_sf_oracle(f, d1, d2);
            assert!((a - b).abs() < 1e-8, "F({d1},{d2}) at {f}: {a} vs {b}");
        }
    }

    #[test]
    fn constant_groups_are_degenerate() {
        let r = anova_oneway(&[vec![2.0; 4], vec![2.0; 3]]).unwrap();
        assert_eq!((r.f, r.p), (0.0, 1.0));
        assert!(r.degenerate);
        assert!(matches!(anova_oneway(&[vec![1.0, 2.0]]), Err(Error::DegenerateGroups(_))));
        assert!(matches!(anova_oneway(&[vec![1.0, 2.0], vec![1.0]]), Err(Error::DegenerateGroups(_))));
    }

    #[test]
    fn two_group_f_is_squared_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a: Vec<f64> = (0..12).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let b: Vec<f64> = (0..12).map(|_| 0.5 + rng.sample::<f64, _>(StandardNormal)).collect();
            let f = anova_oneway(&[a.clone(), b.clone()]).unwrap().f;
            let t = ttest_welch(&a, &b).unwrap().t;
            assert!((f - t * t).abs() < 1e-9 * f.max(1.0));
            let tp = pooled_t(&a, &b);
            assert!((f - tp * tp).abs() < 1e-9 * f.max(1.0));
        }
    }

    proptest! {
        #[test]
        fn anova_shift_and_scale_invariance(
            g in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 3..8), 2..5),
            shift in -100.0f64..100.0,
            scale in 0.01f64..100.0,
        ) {
            let base = anova_oneway(&g).unwrap();
            prop_assume!(!base.degenerate && base.f.is_finite() && base.ss_within > 1e-6);
            let shifted: Vec<Vec<f64>> = g.iter().map(|v| v.iter().map(|x| x + shift).collect()).collect();
            let scaled: Vec<Vec<f64>> = g.iter().map(|v| v.iter().map(|x| x * scale).collect()).collect();
            let tol = 1e-7 * base.f.max(1.0);
            prop_assert!((anova_oneway(&shifted).unwrap().f - base.f).abs() < tol);
            prop_assert!((anova_oneway(&scaled).unwrap().f - base.f).abs() < tol);
        }
    }

    #[test]
    fn studentized_range_critical_value() {
        let q = qtukey(0.05, 3, 12.0);
        assert!((q - 3.77).abs() < 0.02, "{q}");
    }

    #[test]
    fn two_group_range_is_scaled_t() {
        // With k = 2, Q = √2 |T| for T ~ t(df).
        for &(q, df) in &[(0.5, 5.0), (2.0, 10.0), (3.5, 30.0), (5.0, 3.0)] {
            let want = 1.0 - t_two_sided(q / std::f64::consts::SQRT_2, df);
            let got = ptukey(q, 2, df);
            assert!((got - want).abs() < 1e-6, "q {q} df {df}: {got} vs {want}");
        }
    }

    #[test]
    fn tukey_detects_the_outlying_group() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Standardized draws: sample mean exactly `m`, sample std exactly 1.
        let mut group = |m: f64| {
            let z: Vec<f64> = (0..10).map(|_| rng.sample(StandardNormal)).collect();
            let zm = mean(&z);
            let sd = (sum_sq(&z, zm) / 9.0).sqrt();
            z.iter().map(|v| m + (v - zm) / sd).collect::<Vec<f64>>()
        };
        let g = vec![group(0.0), group(0.0), group(5.0)];
        let pairs = tukey_hsd(&g, 0.05).unwrap();
        let sig: Vec<(usize, usize, bool)> = pairs.iter().map(|p| (p.i, p.j, p.significant)).collect();
        assert_eq!(sig, vec![(0, 1, false), (0, 2, true), (1, 2, true)]);
    }

    #[test]
    fn identical_groups_have_unit_p() {
        let g = vec![vec![1.0, 2.0, 3.0]; 3];
        for p in tukey_hsd(&g, 0.05).unwrap() {
            assert_eq!(p.p, 1.0);
            assert!(!p.significant);
        }
    }

    #[test]
    fn t_test_edge_cases() {
        let a = [1.0, 2.0, 4.0];
        let r = ttest_welch(&a, &a).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
        let r = ttest_welch(&[0.0; 4], &[1.0; 4]).unwrap();
        assert!(r.p < 1e-6, "{}", r.p);
        let r = ttest_welch(&[3.0; 4], &[3.0; 5]).unwrap();
        assert!(r.degenerate && r.p == 1.0);
    }

    #[test]
    fn t_test_is_calibrated_under_the_null() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ps: Vec<f64> = (0..2000)
            .map(|_| {
                let a: Vec<f64> = (0..10).map(|_| rng.sample(StandardNormal)).collect();
                let b: Vec<f64> = (0..14).map(|_| rng.sample(StandardNormal)).collect();
                ttest_welch(&a, &b).unwrap().p
            })
            .collect();
        ps.sort_by(f64::total_cmp);
        let n = ps.len() as f64;
        let d = ps
            .iter()
            .enumerate()
            .map(|(i, &p)| (p - i as f64 / n).abs().max(((i + 1) as f64 / n - p).abs()))
            .fold(0.0, f64::max);
        assert!(d < 0.05, "KS distance {d}");
    }
}
