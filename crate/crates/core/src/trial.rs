//! Trial data model and stream alignment.
//!
//! A [`Trial`] holds one feeding attempt: a wrench stream (forces and torques
//! in the fork's local frame) and a pose stream (position and fixed-axis XYZ
//! rotation in the global frame), each at its native sample rate.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of compliance categories.
pub const NUM_CLASSES: usize = 4;

/// Mocap-to-wrench latency measured on the original rig, in seconds.
pub const DEFAULT_POSE_DELAY: f64 = 0.030;

/// Haptic compliance category. Declaration order is the fixed tie-break
/// order used by every classifier: HardSkin first, Soft last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplianceClass {
    HardSkin,
    Hard,
    Medium,
    Soft,
}

impl ComplianceClass {
    pub const ALL: [ComplianceClass; NUM_CLASSES] = [
        ComplianceClass::HardSkin,
        ComplianceClass::Hard,
        ComplianceClass::Medium,
        ComplianceClass::Soft,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(idx: usize) -> Option<Self> {
        Self::ALL.get(idx).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ComplianceClass::HardSkin => "hard_skin",
            ComplianceClass::Hard => "hard",
            ComplianceClass::Medium => "medium",
            ComplianceClass::Soft => "soft",
        }
    }

    /// Steps between two classes along HardSkin > Hard > Medium > Soft.
    pub fn distance(self, other: ComplianceClass) -> usize {
        self.index().abs_diff(other.index())
    }
}

impl fmt::Display for ComplianceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The twelve solid food items and their compliance class, in the order used
/// for per-item confusion matrices.
pub const FOOD_ITEMS: [(&str, ComplianceClass); 12] = [
    ("bell_pepper", ComplianceClass::HardSkin),
    ("cherry_tomato", ComplianceClass::HardSkin),
    ("grape", ComplianceClass::HardSkin),
    ("carrot", ComplianceClass::Hard),
    ("celery", ComplianceClass::Hard),
    ("apple", ComplianceClass::Hard),
    ("cantaloupe", ComplianceClass::Medium),
    ("watermelon", ComplianceClass::Medium),
    ("strawberry", ComplianceClass::Medium),
    ("banana", ComplianceClass::Soft),
    ("blackberry", ComplianceClass::Soft),
    ("egg", ComplianceClass::Soft),
];

/// Canonical spelling of a food item name: lowercase, words joined by `_`.
pub fn canonical_item(name: &str) -> String {
    name.trim()
        .to_lowercase()
        .split(|c: char| c.is_whitespace() || c == '_' || c == '-')
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

/// Looks up the compliance class of a food item.
pub fn item_class(name: &str) -> Result<ComplianceClass> {
    item_index(name).map(|i| FOOD_ITEMS[i].1)
}

/// Position of a food item in [`FOOD_ITEMS`].
pub fn item_index(name: &str) -> Result<usize> {
    let canon = canonical_item(name);
    FOOD_ITEMS
        .iter()
        .position(|(item, _)| *item == canon)
        .ok_or_else(|| Error::UnknownFoodItem(name.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Human,
    Robot,
}

/// Force (N) and torque (N·m) in the fork frame; z is the tine axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrenchSample {
    pub t: f64,
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
}

impl WrenchSample {
    pub fn force_norm(&self) -> f64 {
        (self.fx * self.fx + self.fy * self.fy + self.fz * self.fz).sqrt()
    }

    pub(crate) fn channels(&self) -> [f64; 6] {
        [self.fx, self.fy, self.fz, self.tx, self.ty, self.tz]
    }
}

/// Position (m) and fixed-axis XYZ rotation (rad) in the global frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSample {
    pub t: f64,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
}

impl PoseSample {
    pub(crate) fn channels(&self) -> [f64; 6] {
        [self.px, self.py, self.pz, self.rx, self.ry, self.rz]
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Converts a unit quaternion (w, x, y, z) to fixed-axis XYZ angles
/// `(rx, ry, rz)`, i.e. the rotation `Rz(rz)·Ry(ry)·Rx(rx)`.
pub fn quaternion_to_xyz(w: f64, x: f64, y: f64, z: f64) -> (f64, f64, f64) {
    let n = (w * w + x * x + y * y + z * z).sqrt();
    let (w, x, y, z) = (w / n, x / n, y / n, z / n);
    let rx = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
    let ry = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0).asin();
    let rz = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
    (wrap_angle(rx), wrap_angle(ry), wrap_angle(rz))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: String,
    pub subject: String,
    pub session: u32,
    pub food_item: String,
    pub label: ComplianceClass,
    pub source: Source,
    pub wrench: Vec<WrenchSample>,
    pub pose: Vec<PoseSample>,
}

impl Trial {
    /// Checks the stream invariants: at least two samples per stream,
    /// finite non-negative strictly increasing timestamps, finite values.
    pub fn validate(&self) -> Result<()> {
        check_stream(
            "wrench",
            self.wrench.iter().map(|s| (s.t, s.channels())),
            self.wrench.len(),
        )?;
        check_stream(
            "pose",
            self.pose.iter().map(|s| (s.t, s.channels())),
            self.pose.len(),
        )?;
        if self.session < 1 {
            return Err(Error::InvalidParameter("session must be >= 1".into()));
        }
        let expected = item_class(&self.food_item)?;
        if expected != self.label {
            return Err(Error::InvalidParameter(format!(
                "label {} does not match item {}",
                self.label, self.food_item
            )));
        }
        Ok(())
    }

    /// Duration covered by the wrench stream.
    pub fn duration(&self) -> f64 {
        match (self.wrench.first(), self.wrench.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }
}

fn check_stream(
    name: &'static str,
    samples: impl Iterator<Item = (f64, [f64; 6])>,
    len: usize,
) -> Result<()> {
    if len < 2 {
        return Err(Error::DegenerateStream {
            stream: name,
            samples: len,
        });
    }
    let mut prev = f64::NEG_INFINITY;
    for (i, (t, vals)) in samples.enumerate() {
        if !t.is_finite() || t < 0.0 || vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{name} sample {i} is non-finite or has negative time"
            )));
        }
        if t <= prev {
            return Err(Error::InvalidParameter(format!(
                "{name} timestamps not strictly increasing at sample {i}"
            )));
        }
        prev = t;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub trials: Vec<Trial>,
    pub class_counts: BTreeMap<ComplianceClass, usize>,
}

impl Dataset {
    pub fn new(trials: Vec<Trial>) -> Self {
        let mut class_counts = BTreeMap::new();
        for t in &trials {
            *class_counts.entry(t.label).or_insert(0) += 1;
        }
        Dataset {
            trials,
            class_counts,
        }
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn count(&self, class: ComplianceClass) -> usize {
        self.class_counts.get(&class).copied().unwrap_or(0)
    }
}

/// Shifts pose timestamps by `-delay` so that pose and wrench share one
/// timeline. Pose samples that land before zero are dropped.
pub fn align_streams(trial: &Trial, delay: f64) -> Result<Trial> {
    if !delay.is_finite() {
        return Err(Error::InvalidParameter(format!("delay {delay} is not finite")));
    }
    let pose: Vec<PoseSample> = trial
        .pose
        .iter()
        .map(|p| PoseSample { t: p.t - delay, ..*p })
        .filter(|p| p.t >= 0.0)
        .collect();
    if pose.len() < 2 {
        return Err(Error::DegenerateStream {
            stream: "pose",
            samples: pose.len(),
        });
    }
    if trial.wrench.len() < 2 {
        return Err(Error::DegenerateStream {
            stream: "wrench",
            samples: trial.wrench.len(),
        });
    }
    Ok(Trial {
        pose,
        ..trial.clone()
    })
}
