//! Parametric synthetic trials with class-specific force profiles.
//!
//! The generator exists to exercise the pipeline without recorded data. Each
//! class has a canonical `fz` profile after contact; the other channels carry
//! low-amplitude temporally correlated noise. All force-like channels are
//! multiplied by `domain_shift`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trial::{
    ComplianceClass, Dataset, PoseSample, Source, Trial, WrenchSample, DEFAULT_POSE_DELAY, FOOD_ITEMS,
};

/// Peak `fz` in newtons at `domain_shift = 1`, in class order.
pub const PEAK_FORCE: [f64; 4] = [25.0, 20.0, 10.0, 3.0];
/// Residual force after the hard-skin puncture.
pub const PUNCTURE_FORCE: f64 = 8.0;
/// Time from contact to the hard-skin puncture.
pub const PUNCTURE_TIME: f64 = 0.3;
/// Fork descent speed after contact (m/s), in class order.
const SINK_SPEED: [f64; 4] = [0.010, 0.015, 0.030, 0.060];
const APPROACH_SPEED: f64 = 0.08;
/// Item scale factors within a class.
const ITEM_JITTER: [f64; 3] = [0.97, 1.0, 1.03];
const SUBJECTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub trials_per_class: usize,
    /// Noise level as a fraction of the signal scale.
    pub noise_std: f64,
    pub sample_rate: f64,
    pub duration: f64,
    pub domain_shift: f64,
    pub seed: u64,
    /// Lag of the pose stream behind the wrench stream.
    pub pose_delay: f64,
    /// Make every channel except `fz` independent of the class.
    pub fz_only_signal: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            trials_per_class: 60,
            noise_std: 0.05,
            sample_rate: 120.0,
            duration: 1.5,
            domain_shift: 1.0,
            seed: 0,
            pose_delay: DEFAULT_POSE_DELAY,
            fz_only_signal: false,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std must be >= 0");
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return bad("sample_rate must be > 0");
        }
        if !(self.duration > 0.82 && self.duration.is_finite()) {
            return bad("duration must exceed 0.82 s");
        }
        if !(self.domain_shift > 0.0 && self.domain_shift.is_finite()) {
            return bad("domain_shift must be > 0");
        }
        if !(self.pose_delay >= 0.0 && self.pose_delay.is_finite()) {
            return bad("pose_delay must be >= 0");
        }
        Ok(())
    }
}

/// Generates `trials_per_class` trials for each class, in class order.
pub fn generate(cfg: &GenConfig) -> Result<Dataset> {
    cfg.validate()?;
    let n = cfg.trials_per_class * ComplianceClass::ALL.len();
    let trials = (0..n)
        .into_par_iter()
        .map(|i| {
            let class = ComplianceClass::ALL[i / cfg.trials_per_class];
            synth_trial(cfg, i, class, i % cfg.trials_per_class)
        })
        .collect();
    Ok(Dataset::new(trials))
}

/// Noiseless `fz` at time `tau` after contact, before scaling by amplitude.
fn profile(class: ComplianceClass, tau: f64, ramp: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    match class {
        ComplianceClass::HardSkin => {
            let drop = 0.03;
            let floor = PUNCTURE_FORCE / PEAK_FORCE[0];
            if tau < ramp {
                tau / ramp
            } else if tau < ramp + drop {
                1.0 - (1.0 - floor) * (tau - ramp) / drop
            } else {
                floor
            }
        }
        _ => (tau / ramp).min(1.0),
    }
}

fn ramp_time(class: ComplianceClass) -> f64 {
    match class {
        ComplianceClass::HardSkin => PUNCTURE_TIME,
        ComplianceClass::Hard => 0.40,
        ComplianceClass::Medium => 0.35,
        ComplianceClass::Soft => 0.25,
    }
}

struct Ar1 {
    state: f64,
    std: f64,
}

impl Ar1 {
    const RHO: f64 = 0.9;

    fn new(rng: &mut ChaCha8Rng, std: f64) -> Self {
        let state = std * rng.sample::<f64, _>(StandardNormal);
        Ar1 { state, std }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.state = Self::RHO * self.state + (1.0 - Self::RHO * Self::RHO).sqrt() * self.std * z;
        self.state
    }
}

fn synth_trial(cfg: &GenConfig, index: usize, class: ComplianceClass, within: usize) -> Trial {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };

    let items: Vec<&str> = FOOD_ITEMS
        .iter()
        .filter(|(_, c)| *c == class)
        .map(|(name, _)| *name)
        .collect();
    let item_idx = within % items.len();
    let s = cfg.domain_shift;
    let noise = cfg.noise_std;

    let amp = PEAK_FORCE[class.index()] * s * ITEM_JITTER[item_idx] * (1.0 + 0.5 * noise * normal(&mut rng));
    let amp = amp.max(0.0);
    let ramp = ramp_time(class) * (1.0 + 0.25 * noise * normal(&mut rng)).clamp(0.5, 1.5);
    let onset = rng.random_range(0.2..0.4);
    let sample_noise = 0.1 * noise * amp;

    let fz_only = cfg.fz_only_signal;
    let coupling = if fz_only { 0.0 } else { 0.03 };
    let slip = !fz_only && class == ComplianceClass::Soft;
    let sink = SINK_SPEED[class.index()] * (1.0 + 0.2 * noise * normal(&mut rng));

    let mut lateral = [
        Ar1::new(&mut rng, 0.05 * s),
        Ar1::new(&mut rng, 0.05 * s),
        Ar1::new(&mut rng, 0.02 * s),
    ];
    let mut torque = [
        Ar1::new(&mut rng, 0.005 * s),
        Ar1::new(&mut rng, 0.005 * s),
        Ar1::new(&mut rng, 0.002 * s),
    ];
    let mut pose_noise = [Ar1::new(&mut rng, 0.0005), Ar1::new(&mut rng, 0.0005), Ar1::new(&mut rng, 0.0005)];
    let mut angle_noise = [Ar1::new(&mut rng, 0.005), Ar1::new(&mut rng, 0.005), Ar1::new(&mut rng, 0.005)];
    let tilt_rate = if slip { 0.6 * (1.0 + 0.2 * normal(&mut rng)) } else { 0.0 };
    let start = [rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05)];
    let pz_contact = 0.02;

    let n = (cfg.duration * cfg.sample_rate).floor() as usize + 1;
    let mut wrench = Vec::with_capacity(n);
    let mut pose = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / cfg.sample_rate;
        let tau = t - onset;
        let in_contact = tau > 0.0;

        let mut fz = amp * profile(class, tau, ramp) + lateral[2].next(&mut rng);
        if in_contact {
            fz += sample_noise * normal(&mut rng);
        }
        let tilt = if in_contact { tilt_rate * tau.min(0.5) } else { 0.0 };
        let mut fx = coupling * fz + lateral[0].next(&mut rng);
        if slip {
            fx += 0.15 * amp * (tilt / 0.3).min(1.0);
        }
        let fy = coupling * fz + lateral[1].next(&mut rng);
        let tx = coupling * 0.01 * fz + torque[0].next(&mut rng);
        let ty = coupling * 0.01 * fz + torque[1].next(&mut rng);
        let tz = torque[2].next(&mut rng);
        wrench.push(WrenchSample { t, fx, fy, fz, tx, ty, tz });

        // With the signal confined to fz the fork is held still: any motion
        // would be phase-locked to contact and leak the class into pz.
        let pz = if fz_only {
            pz_contact
        } else if in_contact {
            pz_contact - sink * tau
        } else {
            pz_contact - APPROACH_SPEED * tau
        };
        pose.push(PoseSample {
            t: t + cfg.pose_delay,
            px: start[0] + pose_noise[0].next(&mut rng),
            py: start[1] + pose_noise[1].next(&mut rng),
            pz: pz + pose_noise[2].next(&mut rng),
            rx: tilt + angle_noise[0].next(&mut rng),
            ry: angle_noise[1].next(&mut rng),
            rz: angle_noise[2].next(&mut rng),
        });
    }

    Trial {
        id: format!("synth-{index:05}"),
        subject: format!("subject_{}", within % SUBJECTS + 1),
        session: 1,
        food_item: items[item_idx].to_string(),
        label: class,
        source: if s == 1.0 { Source::Human } else { Source::Robot },
        wrench,
        pose,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{prepare_dataset, FeatureSet, PipelineConfig};

    fn peak_fz(t: &Trial) -> f64 {
        t.wrench.iter().map(|w| w.fz).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Leave-one-out 1-nearest-neighbor accuracy on the peak `fz` alone.
    fn nn_peak_accuracy(ds: &Dataset) -> f64 {
        let peaks: Vec<f64> = ds.trials.iter().map(peak_fz).collect();
        let mut correct = 0;
        for (i, &p) in peaks.iter().enumerate() {
            let nearest = (0..peaks.len())
                .filter(|&j| j != i)
                .min_by(|&a, &b| (peaks[a] - p).abs().total_cmp(&(peaks[b] - p).abs()))
                .unwrap();
            correct += usize::from(ds.trials[nearest].label == ds.trials[i].label);
        }
        correct as f64 / peaks.len() as f64
    }

    #[test]
    fn counts_and_balance() {
        let ds = generate(&GenConfig { trials_per_class: 60, ..GenConfig::default() }).unwrap();
        assert_eq!(ds.len(), 240);
        for c in ComplianceClass::ALL {
            assert_eq!(ds.count(c), 60);
        }
    }

    #[test]
    fn noiseless_peaks_are_distinct() {
        let ds = generate(&GenConfig { trials_per_class: 6, noise_std: 0.0, ..GenConfig::default() }).unwrap();
        let mut means = [0.0; 4];
        for t in &ds.trials {
            means[t.label.index()] += peak_fz(t) / 6.0;
        }
        for (m, want) in means.iter().zip(PEAK_FORCE) {
            assert!((m - want).abs() < 0.5, "{means:?}");
        }
    }

    #[test]
    fn deterministic_and_valid() {
        let cfg = GenConfig { trials_per_class: 5, noise_std: 0.3, seed: 4, ..GenConfig::default() };
        let a = generate(&cfg).unwrap();
        assert_eq!(a, generate(&cfg).unwrap());
        assert_ne!(a, generate(&GenConfig { seed: 5, ..cfg.clone() }).unwrap());
        for t in &a.trials {
            t.validate().unwrap();
        }
        let fms = prepare_dataset(&a, &PipelineConfig::default(), &FeatureSet::all(true)).unwrap();
        assert_eq!(fms.len(), 20);
        assert!(fms.iter().all(|fm| fm.rows == 64 && fm.cols() == 24));
    }

    #[test]
    fn items_cycle_within_class() {
        let ds = generate(&GenConfig { trials_per_class: 6, ..GenConfig::default() }).unwrap();
        for t in &ds.trials {
            assert_eq!(crate::trial::item_class(&t.food_item).unwrap(), t.label);
        }
        let distinct: std::collections::BTreeSet<_> = ds.trials.iter().map(|t| t.food_item.as_str()).collect();
        assert_eq!(distinct.len(), 12);
    }

    #[test]
    fn peak_oracle_separates_at_low_noise() {
        let ds = generate(&GenConfig { trials_per_class: 60, noise_std: 0.05, seed: 1, ..GenConfig::default() }).unwrap();
        let acc = nn_peak_accuracy(&ds);
        assert!(acc >= 0.95, "{acc}");
    }

    #[test]
    fn peak_oracle_degrades_with_noise() {
        for seed in 0..3 {
            let accs: Vec<f64> = [0.0, 0.05, 0.2, 0.5]
                .iter()
                .map(|&noise_std| {
                    let cfg = GenConfig { trials_per_class: 40, noise_std, seed, ..GenConfig::default() };
                    nn_peak_accuracy(&generate(&cfg).unwrap())
                })
                .collect();
            assert!(accs.windows(2).all(|w| w[1] <= w[0]), "seed {seed}: {accs:?}");
        }
    }

    #[test]
    fn domain_shift_scales_force() {
        let base = GenConfig { trials_per_class: 3, noise_std: 0.0, ..GenConfig::default() };
        let a = generate(&base).unwrap();
        let b = generate(&GenConfig { domain_shift: 1.6, ..base }).unwrap();
        for (x, y) in a.trials.iter().zip(&b.trials) {
            assert!((peak_fz(y) / peak_fz(x) - 1.6).abs() < 0.05);
            assert_eq!(y.source, Source::Robot);
        }
    }

    #[test]
    fn rejects_invalid_config() {
        for cfg in [
            GenConfig { noise_std: -0.1, ..GenConfig::default() },
            GenConfig { sample_rate: 0.0, ..GenConfig::default() },
            GenConfig { duration: 0.8, ..GenConfig::default() },
        ] {
            assert!(generate(&cfg).is_err());
        }
    }
}
