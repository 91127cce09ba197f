//! From raw trials to fixed-shape feature matrices.
//!
//! The pipeline for one trial is: align the pose stream to the wrench stream,
//! find the first sustained fork-food contact, cut the bite-acquisition
//! window, resample every selected channel onto a uniform grid (64 steps by
//! default), optionally append first derivatives, and finally z-score with
//! statistics fitted on training data only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trial::{align_streams, ComplianceClass, Dataset, Trial, DEFAULT_POSE_DELAY};

pub const DEFAULT_GRID_LEN: usize = 64;
pub const DEFAULT_CONTACT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_CONTACT_HOLD: f64 = 0.05;
pub const DEFAULT_WINDOW: f64 = 0.82;
pub const STD_FLOOR: f64 = 1e-8;

/// The twelve raw channels in canonical order.
pub const CHANNELS: [&str; 12] = [
    "fx", "fy", "fz", "tx", "ty", "tz", "px", "py", "pz", "rx", "ry", "rz",
];

const GROUPS: [(&str, [usize; 3]); 4] = [
    ("force", [0, 1, 2]),
    ("torque", [3, 4, 5]),
    ("position", [6, 7, 8]),
    ("rotation", [9, 10, 11]),
];

/// Which raw channels feed a classifier, and whether their first
/// derivatives are appended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureSet {
    channels: [bool; 12],
    pub derivatives: bool,
}

impl FeatureSet {
    pub fn from_groups(
        force: bool,
        torque: bool,
        position: bool,
        rotation: bool,
        derivatives: bool,
    ) -> Result<Self> {
        let mut channels = [false; 12];
        for (on, (_, idx)) in [force, torque, position, rotation].into_iter().zip(GROUPS) {
            for i in idx {
                channels[i] = on;
            }
        }
        Self::from_mask(channels, derivatives)
    }

    pub fn from_mask(channels: [bool; 12], derivatives: bool) -> Result<Self> {
        if !channels.iter().any(|&c| c) {
            return Err(Error::InvalidFeatureSet("no channel selected".into()));
        }
        Ok(FeatureSet {
            channels,
            derivatives,
        })
    }

    pub fn all(derivatives: bool) -> Self {
        FeatureSet {
            channels: [true; 12],
            derivatives,
        }
    }

    /// Parses `force+position+deriv`, `fz`, `all-deriv`, `fx,fy,fz` and
    /// similar. Terms are joined by `+` or `,`; `deriv` switches derivatives
    /// on and a trailing `-deriv` switches them off.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut channels = [false; 12];
        let mut derivatives = false;
        let mut rest = spec.trim();
        if let Some(stripped) = rest.strip_suffix("-deriv") {
            rest = stripped;
        }
        for term in rest.split(['+', ',']).map(str::trim) {
            match term {
                "" => continue,
                "deriv" => derivatives = true,
                "all" => channels = [true; 12],
                name => {
                    if let Some((_, idx)) = GROUPS.iter().find(|(g, _)| *g == name) {
                        for &i in idx {
                            channels[i] = true;
                        }
                    } else if let Some(i) = CHANNELS.iter().position(|c| *c == name) {
                        channels[i] = true;
                    } else {
                        return Err(Error::InvalidFeatureSet(format!("unknown term `{name}`")));
                    }
                }
            }
        }
        Self::from_mask(channels, derivatives)
            .map_err(|_| Error::InvalidFeatureSet(format!("`{spec}` selects no channel")))
    }

    /// Canonical short name, e.g. `force+position+deriv` or `fz`.
    pub fn id(&self) -> String {
        let mut terms: Vec<&str> = Vec::new();
        if self.channels.iter().all(|&c| c) {
            terms.push("all");
        } else {
            let mut covered = [false; 12];
            for (name, idx) in GROUPS {
                if idx.iter().all(|&i| self.channels[i]) {
                    terms.push(name);
                    for i in idx {
                        covered[i] = true;
                    }
                }
            }
            for (i, name) in CHANNELS.iter().enumerate() {
                if self.channels[i] && !covered[i] {
                    terms.push(name);
                }
            }
        }
        if self.derivatives {
            terms.push("deriv");
        }
        terms.join("+")
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        (0..12).filter(move |&i| self.channels[i])
    }

    pub fn includes(&self, channel: usize) -> bool {
        self.channels.get(channel).copied().unwrap_or(false)
    }

    /// Number of matrix columns this set produces.
    pub fn width(&self) -> usize {
        let raw = self.selected().count();
        if self.derivatives {
            2 * raw
        } else {
            raw
        }
    }

    pub fn channel_names(&self) -> Vec<String> {
        let raw: Vec<String> = self.selected().map(|i| CHANNELS[i].to_string()).collect();
        let mut names = raw.clone();
        if self.derivatives {
            names.extend(raw.iter().map(|n| format!("d_{n}")));
        }
        names
    }
}

/// A `rows × channels` matrix, time-major (row `i` is grid step `i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub channel_names: Vec<String>,
    pub values: Vec<f64>,
    pub label: Option<ComplianceClass>,
    pub item: Option<String>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, channel_names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * channel_names.len() {
            return Err(Error::dims(
                format!("{} values", rows * channel_names.len()),
                values.len(),
            ));
        }
        Ok(FeatureMatrix {
            rows,
            channel_names,
            values,
            label: None,
            item: None,
        })
    }

    pub fn with_label(mut self, label: ComplianceClass) -> Self {
        self.label = Some(label);
        self
    }

    pub fn cols(&self) -> usize {
        self.channel_names.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.cols();
        &self.values[row * c..(row + 1) * c]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        self.channel_names
            .iter()
            .position(|n| n == name)
            .map(|c| self.column(c))
    }

    fn from_columns(columns: &[Vec<f64>], channel_names: Vec<String>) -> Self {
        let rows = columns.first().map_or(0, Vec::len);
        let cols = columns.len();
        let mut values = vec![0.0; rows * cols];
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                values[i * cols + j] = *v;
            }
        }
        FeatureMatrix {
            rows,
            channel_names,
            values,
            label: None,
            item: None,
        }
    }
}

/// Per-channel mean and standard deviation of the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub channel_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Z-scores every channel of `fm`.
    pub fn apply(&self, fm: &FeatureMatrix) -> Result<FeatureMatrix> {
        if fm.channel_names != self.channel_names {
            return Err(Error::dims(
                self.channel_names.join(","),
                fm.channel_names.join(","),
            ));
        }
        let c = fm.cols();
        let values = fm
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| (v - self.mean[k % c]) / self.std[k % c])
            .collect();
        Ok(FeatureMatrix {
            values,
            ..fm.clone()
        })
    }
}

/// Fits per-channel moments over every row of every training matrix.
pub fn fit_norm(train: &[FeatureMatrix]) -> Result<NormStats> {
    let first = train.first().ok_or(Error::EmptyTrainingSet)?;
    let c = first.cols();
    let mut sum = vec![0.0; c];
    let mut n = 0usize;
    for fm in train {
        if fm.channel_names != first.channel_names {
            return Err(Error::dims(
                first.channel_names.join(","),
                fm.channel_names.join(","),
            ));
        }
        for r in 0..fm.rows {
            for (s, v) in sum.iter_mut().zip(fm.row(r)) {
                *s += v;
            }
        }
        n += fm.rows;
    }
    if n == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let mut sq = vec![0.0; c];
    for fm in train {
        for r in 0..fm.rows {
            for ((s, v), m) in sq.iter_mut().zip(fm.row(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
    }
    let std = sq
        .iter()
        .map(|s| (s / n as f64).sqrt().max(STD_FLOOR))
        .collect();
    Ok(NormStats {
        channel_names: first.channel_names.clone(),
        mean,
        std,
    })
}

/// Earliest time at which the force magnitude reaches `threshold` and stays
/// there for the following `hold` seconds.
pub fn detect_contact(trial: &Trial, threshold: f64, hold: f64) -> Result<f64> {
    if !(threshold > 0.0) || !(hold >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "contact threshold {threshold} / hold {hold}"
        )));
    }
    let w = &trial.wrench;
    let above: Vec<bool> = w.iter().map(|s| s.force_norm() >= threshold).collect();
    let last_t = w.last().map_or(f64::NEG_INFINITY, |s| s.t);
    'candidates: for i in 0..w.len() {
        if !above[i] {
            continue;
        }
        let until = w[i].t + hold;
        if until > last_t + 1e-12 {
            break;
        }
        for j in i + 1..w.len() {
            if w[j].t > until + 1e-12 {
                break;
            }
            if !above[j] {
                continue 'candidates;
            }
        }
        return Ok(w[i].t);
    }
    Err(Error::NoContact)
}

/// A windowed trial. `truncated` is set when the trial ended before the
/// requested window did.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub trial: Trial,
    pub truncated: bool,
}

/// Restricts both streams to `[t0, t0 + duration]` and rebases time to 0.
/// `duration = None` keeps everything after `t0`.
pub fn extract_window(trial: &Trial, t0: f64, duration: Option<f64>) -> Result<Segment> {
    if let Some(d) = duration {
        if !(d > 0.0) {
            return Err(Error::InvalidParameter(format!("window duration {d}")));
        }
    }
    const EPS: f64 = 1e-9;
    let end = duration.map_or(f64::INFINITY, |d| t0 + d);
    let inside = |t: f64| t >= t0 - EPS && t <= end + EPS;

    let wrench: Vec<_> = trial
        .wrench
        .iter()
        .filter(|s| inside(s.t))
        .map(|s| crate::trial::WrenchSample {
            t: (s.t - t0).max(0.0),
            ..*s
        })
        .collect();
    let pose: Vec<_> = trial
        .pose
        .iter()
        .filter(|s| inside(s.t))
        .map(|s| crate::trial::PoseSample {
            t: (s.t - t0).max(0.0),
            ..*s
        })
        .collect();
    if wrench.len() < 2 {
        return Err(Error::DegenerateStream {
            stream: "wrench",
            samples: wrench.len(),
        });
    }
    if pose.len() < 2 {
        return Err(Error::DegenerateStream {
            stream: "pose",
            samples: pose.len(),
        });
    }
    let last = |ts: &[f64]| ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let stream_end = last(&[
        trial.wrench.last().map_or(0.0, |s| s.t),
        trial.pose.last().map_or(0.0, |s| s.t),
    ]);
    let truncated = duration.is_some() && stream_end < end - EPS;
    Ok(Segment {
        trial: Trial {
            wrench,
            pose,
            ..trial.clone()
        },
        truncated,
    })
}

/// Uniform grid of `n` points from `start` to `end`, endpoints exact.
pub fn uniform_grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    let span = end - start;
    (0..n)
        .map(|i| {
            if i + 1 == n {
                end
            } else {
                start + i as f64 * span / (n - 1) as f64
            }
        })
        .collect()
}

/// Linearly interpolates `(times, values)` at each point of `grid`, which
/// must be sorted and lie within the series' time range.
pub fn interpolate(times: &[f64], values: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    if times.len() < 2 || times.len() != values.len() {
        return Err(Error::DegenerateSeries);
    }
    let mut out = Vec::with_capacity(grid.len());
    let mut k = 0;
    for &g in grid {
        // advance to the segment with times[k] <= g < times[k + 1]
        while k + 2 < times.len() && times[k + 1] <= g {
            k += 1;
        }
        let (ta, tb) = (times[k], times[k + 1]);
        let v = if g == tb {
            values[k + 1]
        } else {
            let w = (g - ta) / (tb - ta);
            values[k] + (values[k + 1] - values[k]) * w
        };
        out.push(v);
    }
    Ok(out)
}

/// Resamples a time-ordered series onto `n` uniformly spaced points spanning
/// its first and last timestamps.
pub fn resample_linear(series: &[(f64, f64)], n: usize) -> Result<Vec<f64>> {
    if series.len() < 2 || n < 2 {
        return Err(Error::DegenerateSeries);
    }
    let (t_first, t_last) = (series[0].0, series[series.len() - 1].0);
    if !(t_last > t_first) {
        return Err(Error::DegenerateSeries);
    }
    let (times, values): (Vec<f64>, Vec<f64>) = series.iter().copied().unzip();
    interpolate(&times, &values, &uniform_grid(t_first, t_last, n))
}

/// Central differences inside, second-order one-sided differences at the ends.
pub fn first_derivative(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        2 => {
            let d = (values[1] - values[0]) / dt;
            vec![d, d]
        }
        _ => {
            let mut out = Vec::with_capacity(n);
            out.push((-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dt));
            for i in 1..n - 1 {
                out.push((values[i + 1] - values[i - 1]) / (2.0 * dt));
            }
            out.push((3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * dt));
            out
        }
    }
}

/// Builds the `n × F` feature matrix of a windowed trial. Both streams are
/// interpolated on one grid spanning the time range they share.
pub fn assemble_features(
    segment: &Trial,
    fs: &FeatureSet,
    stats: Option<&NormStats>,
    n: usize,
) -> Result<FeatureMatrix> {
    if n < 2 {
        return Err(Error::DegenerateSeries);
    }
    let wt: Vec<f64> = segment.wrench.iter().map(|s| s.t).collect();
    let pt: Vec<f64> = segment.pose.iter().map(|s| s.t).collect();
    let (Some(&w0), Some(&w1), Some(&p0), Some(&p1)) =
        (wt.first(), wt.last(), pt.first(), pt.last())
    else {
        return Err(Error::DegenerateSeries);
    };
    let start = w0.max(p0);
    let end = w1.min(p1);
    if !(end > start) || wt.len() < 2 || pt.len() < 2 {
        return Err(Error::DegenerateSeries);
    }
    let grid = uniform_grid(start, end, n);
    let dt = (end - start) / (n - 1) as f64;

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(fs.width());
    for ch in fs.selected() {
        let values: Vec<f64> = if ch < 6 {
            segment.wrench.iter().map(|s| s.channels()[ch]).collect()
        } else {
            segment.pose.iter().map(|s| s.channels()[ch - 6]).collect()
        };
        let times = if ch < 6 { &wt } else { &pt };
        columns.push(interpolate(times, &values, &grid)?);
    }
    if fs.derivatives {
        let derivs: Vec<Vec<f64>> = columns.iter().map(|c| first_derivative(c, dt)).collect();
        columns.extend(derivs);
    }
    let mut fm = FeatureMatrix::from_columns(&columns, fs.channel_names());
    fm.label = Some(segment.label);
    fm.item = Some(segment.food_item.clone());
    match stats {
        Some(s) => s.apply(&fm),
        None => Ok(fm),
    }
}

/// Windowing and gridding parameters shared by every classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub pose_delay: f64,
    pub contact_threshold: f64,
    pub contact_hold: f64,
    /// `None` keeps the whole post-contact phase.
    pub window: Option<f64>,
    pub grid_len: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            pose_delay: DEFAULT_POSE_DELAY,
            contact_threshold: DEFAULT_CONTACT_THRESHOLD,
            contact_hold: DEFAULT_CONTACT_HOLD,
            window: Some(DEFAULT_WINDOW),
            grid_len: DEFAULT_GRID_LEN,
        }
    }
}

/// Runs align → contact → window → grid for one trial, without normalization.
pub fn prepare_trial(trial: &Trial, cfg: &PipelineConfig, fs: &FeatureSet) -> Result<FeatureMatrix> {
    let aligned = align_streams(trial, cfg.pose_delay)?;
    let t0 = detect_contact(&aligned, cfg.contact_threshold, cfg.contact_hold)?;
    let seg = extract_window(&aligned, t0, cfg.window)?;
    assemble_features(&seg.trial, fs, None, cfg.grid_len)
}

/// [`prepare_trial`] over a whole dataset; errors name the offending trial.
pub fn prepare_dataset(
    ds: &Dataset,
    cfg: &PipelineConfig,
    fs: &FeatureSet,
) -> Result<Vec<FeatureMatrix>> {
    ds.trials
        .iter()
        .map(|t| prepare_trial(t, cfg, fs).map_err(|e| e.in_trial(&t.id)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trial::{PoseSample, Source, WrenchSample};

    fn trial_from_fz(times: &[f64], fz: impl Fn(f64) -> f64) -> Trial {
        Trial {
            id: "x".into(),
            subject: "s".into(),
            session: 1,
            food_item: "carrot".into(),
            label: ComplianceClass::Hard,
            source: Source::Human,
            wrench: times
                .iter()
                .map(|&t| WrenchSample { t, fx: 0.0, fy: 0.0, fz: fz(t), tx: 0.0, ty: 0.0, tz: 0.0 })
                .collect(),
            pose: times
                .iter()
                .map(|&t| PoseSample { t, px: 0.0, py: 0.0, pz: -t, rx: 0.0, ry: 0.0, rz: 0.0 })
                .collect(),
        }
    }

    fn times(rate: f64, duration: f64) -> Vec<f64> {
        let n = (duration * rate).round() as usize;
        (0..n).map(|i| i as f64 / rate).collect()
    }

    #[test]
    fn no_contact_on_zero_force() {
        let t = trial_from_fz(&times(120.0, 2.0), |_| 0.0);
        assert!(matches!(detect_contact(&t, 0.5, 0.05), Err(Error::NoContact)));
    }

    #[test]
    fn contact_at_step() {
        // 1 kHz so the step lands exactly on a sample
        let ts: Vec<f64> = (0..2000).map(|i| i as f64 / 1000.0).collect();
        let t = trial_from_fz(&ts, |t| if t >= 1.0 { 2.0 } else { 0.0 });
        let c = detect_contact(&t, DEFAULT_CONTACT_THRESHOLD, DEFAULT_CONTACT_HOLD).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contact_ignores_short_spike() {
        let ts: Vec<f64> = (0..2000).map(|i| i as f64 / 1000.0).collect();
        let fz = |t: f64| {
            if (0.5..0.52).contains(&t) {
                3.0
            } else if t >= 1.0 {
                2.0
            } else {
                0.0
            }
        };
        let t = trial_from_fz(&ts, fz);
        let c = detect_contact(&t, 0.5, 0.05).unwrap();
        // oracle: scan every sample for a sustained crossing
        let oracle = t
            .wrench
            .iter()
            .map(|s| s.t)
            .find(|&t0| {
                t.wrench
                    .iter()
                    .filter(|s| s.t >= t0 && s.t <= t0 + 0.05 + 1e-12)
                    .all(|s| s.force_norm() >= 0.5)
                    && t0 + 0.05 <= 1.999
            })
            .unwrap();
        assert_eq!(c, oracle);
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn window_superset_is_truncated() {
        let t = trial_from_fz(&times(120.0, 1.0), |t| t);
        let seg = extract_window(&t, 0.0, Some(5.0)).unwrap();
        assert!(seg.truncated);
        assert_eq!(seg.trial.wrench.len(), t.wrench.len());
    }

    #[test]
    fn window_interval_arithmetic() {
        let t = trial_from_fz(&times(120.0, 1.0), |t| t);
        let seg = extract_window(&t, 0.1, Some(0.82)).unwrap();
        assert!(!seg.truncated);
        let expected: Vec<f64> = t
            .wrench
            .iter()
            .map(|s| s.t)
            .filter(|&x| x >= 0.1 - 1e-9 && x <= 0.92 + 1e-9)
            .collect();
        assert_eq!(seg.trial.wrench.len(), expected.len());
        assert!(seg.trial.wrench[0].t.abs() < 1e-12);
        // fz = t, so the rebased sample carries its original time as its value
        assert!((seg.trial.wrench[0].fz - expected[0]).abs() < 1e-12);
        let last = seg.trial.wrench.last().unwrap();
        assert!(last.t <= 0.82 + 1e-9);
        assert!(extract_window(&t, 0.99, Some(0.82)).is_err());
        assert!(extract_window(&t, 0.0, Some(0.0)).is_err());
    }

    #[test]
    fn resample_identity_and_constant() {
        let grid = uniform_grid(0.0, 0.82, 64);
        let series: Vec<(f64, f64)> = grid.iter().map(|&t| (t, (t * 7.0).sin())).collect();
        let out = resample_linear(&series, 64).unwrap();
        for (o, (_, v)) in out.iter().zip(&series) {
            assert_eq!(o, v);
        }
        let c: Vec<(f64, f64)> = (0..17).map(|i| (i as f64 * 0.013 + 0.2, 4.25)).collect();
        assert!(resample_linear(&c, 64).unwrap().iter().all(|&v| v == 4.25));
    }

    #[test]
    fn resample_affine_exact() {
        let ts = [0.0, 0.011, 0.05, 0.051, 0.2, 0.37, 0.5, 0.81, 0.82];
        let series: Vec<(f64, f64)> = ts.iter().map(|&t| (t, 3.0 * t + 1.0)).collect();
        let out = resample_linear(&series, 64).unwrap();
        for (g, v) in uniform_grid(0.0, 0.82, 64).iter().zip(&out) {
            assert!((v - (3.0 * g + 1.0)).abs() < 1e-12);
        }
        assert_eq!(out[0], 1.0);
        assert_eq!(out[63], 3.0 * 0.82 + 1.0);
    }

    #[test]
    fn resample_rejects_degenerate() {
        assert!(matches!(resample_linear(&[(0.0, 1.0)], 64), Err(Error::DegenerateSeries)));
        assert!(matches!(
            resample_linear(&[(0.5, 1.0), (0.5, 2.0)], 64),
            Err(Error::DegenerateSeries)
        ));
    }

    #[test]
    fn derivative_cases() {
        assert!(first_derivative(&[2.0; 10], 0.1).iter().all(|&d| d == 0.0));
        let ramp: Vec<f64> = (0..64).map(|i| 0.5 * i as f64 * 0.013).collect();
        assert!(first_derivative(&ramp, 0.013).iter().all(|d| (d - 0.5).abs() < 1e-12));
        let grid = uniform_grid(0.0, 0.82, 64);
        let dt = 0.82 / 63.0;
        let s: Vec<f64> = grid.iter().map(|t| (2.0 * std::f64::consts::PI * t).sin()).collect();
        let d = first_derivative(&s, dt);
        let max_err = grid
            .iter()
            .zip(&d)
            .map(|(t, d)| (d - 2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * t).cos()).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 0.02, "max error {max_err}");
    }

    #[test]
    fn norm_degenerate_and_symmetric() {
        let zeros = FeatureMatrix::new(64, vec!["fz".into()], vec![0.0; 64]).unwrap();
        let s = fit_norm(&[zeros]).unwrap();
        assert_eq!(s.mean, vec![0.0]);
        assert_eq!(s.std, vec![STD_FLOOR]);
        let pm = FeatureMatrix::new(4, vec!["fz".into()], vec![-1.0, 1.0, -1.0, 1.0]).unwrap();
        let s = fit_norm(&[pm]).unwrap();
        assert_eq!(s.mean, vec![0.0]);
        assert_eq!(s.std, vec![1.0]);
        assert!(matches!(fit_norm(&[]), Err(Error::EmptyTrainingSet)));
    }

    #[test]
    fn norm_rejects_channel_mismatch() {
        let a = FeatureMatrix::new(2, vec!["fz".into()], vec![0.0, 1.0]).unwrap();
        let b = FeatureMatrix::new(2, vec!["fx".into()], vec![0.0, 1.0]).unwrap();
        let s = fit_norm(std::slice::from_ref(&a)).unwrap();
        assert!(s.apply(&b).is_err());
        assert!(fit_norm(&[a, b]).is_err());
    }

    #[test]
    fn feature_set_widths_and_names() {
        let force = FeatureSet::from_groups(true, false, false, false, false).unwrap();
        assert_eq!(force.width(), 3);
        assert_eq!(FeatureSet::all(true).width(), 24);
        let names = FeatureSet::all(true).channel_names();
        assert_eq!(names[0], "fx");
        assert_eq!(names[11], "rz");
        assert_eq!(names[12], "d_fx");
        assert_eq!(names[23], "d_rz");
        assert!(FeatureSet::from_groups(false, false, false, false, true).is_err());
    }

    #[test]
    fn feature_set_grammar() {
        assert_eq!(FeatureSet::parse("all").unwrap(), FeatureSet::all(false));
        assert_eq!(FeatureSet::parse("all+deriv").unwrap(), FeatureSet::all(true));
        assert_eq!(FeatureSet::parse("all-deriv").unwrap(), FeatureSet::all(false));
        let fp = FeatureSet::parse("force,position").unwrap();
        assert_eq!(fp, FeatureSet::parse("force+position").unwrap());
        assert_eq!(fp.id(), "force+position");
        assert_eq!(FeatureSet::parse("fz").unwrap().id(), "fz");
        assert_eq!(FeatureSet::parse("fz+rx+deriv").unwrap().id(), "fz+rx+deriv");
        assert_eq!(FeatureSet::parse("fx+fy+fz").unwrap().id(), "force");
        assert!(FeatureSet::parse("deriv").is_err());
        assert!(FeatureSet::parse("velocity").is_err());
        assert!(FeatureSet::parse("").is_err());
        for spec in ["all+deriv", "torque+rx", "position", "fy+pz+deriv"] {
            let fs = FeatureSet::parse(spec).unwrap();
            assert_eq!(FeatureSet::parse(&fs.id()).unwrap(), fs);
        }
    }

    #[test]
    fn assemble_shapes() {
        let t = trial_from_fz(&times(120.0, 1.0), |t| 10.0 * t);
        let fm = assemble_features(
            &t,
            &FeatureSet::from_groups(true, false, false, false, false).unwrap(),
            None,
            64,
        )
        .unwrap();
        assert_eq!((fm.rows, fm.cols()), (64, 3));
        let fm = assemble_features(&t, &FeatureSet::all(true), None, 64).unwrap();
        assert_eq!((fm.rows, fm.cols()), (64, 24));
        assert_eq!(fm.label, Some(ComplianceClass::Hard));
        assert!(fm.values.iter().all(|v| v.is_finite()));
        // d_fz of a 10 N/s ramp
        let d = fm.column_by_name("d_fz").unwrap();
        assert!(d.iter().all(|v| (v - 10.0).abs() < 1e-9));
    }
}
