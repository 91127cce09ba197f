//! JSON-lines trial files.
//!
//! One trial per line:
//!
//! ```text
//! {"id":"..","subject":"..","session":1,"food_item":"grape","source":"human",
//!  "wrench":[[t,fx,fy,fz,tx,ty,tz],...],"pose":[[t,px,py,pz,rx,ry,rz],...]}
//! ```
//!
//! Pose rows may alternatively carry an orientation quaternion as
//! `[t,px,py,pz,qw,qx,qy,qz]`; it is converted to fixed-axis XYZ angles on load.
//! The class label is never stored; it is derived from `food_item`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trial::{
    canonical_item, item_class, quaternion_to_xyz, wrap_angle, Dataset, PoseSample, Source,
    Trial, WrenchSample,
};

#[derive(Debug, Serialize, Deserialize)]
struct TrialRecord {
    id: String,
    subject: String,
    session: u32,
    food_item: String,
    source: Source,
    wrench: Vec<Vec<f64>>,
    pose: Vec<Vec<f64>>,
}

/// Reads every trial in a JSON-lines file, preserving file order.
pub fn load_trials(path: impl AsRef<Path>) -> Result<Dataset> {
    let reader = BufReader::new(File::open(path)?);
    let mut trials = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        trials.push(parse_trial(&line, i + 1)?);
    }
    if trials.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Dataset::new(trials))
}

/// Parses a single JSON-lines record. `line` is 1-based and only used for
/// error reporting.
pub fn parse_trial(text: &str, line: usize) -> Result<Trial> {
    let malformed = |reason: String| Error::MalformedRecord { line, reason };
    let rec: TrialRecord = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    let label = item_class(&rec.food_item)?;

    let wrench = rec
        .wrench
        .iter()
        .enumerate()
        .map(|(i, row)| match row.as_slice() {
            &[t, fx, fy, fz, tx, ty, tz] => Ok(WrenchSample { t, fx, fy, fz, tx, ty, tz }),
            _ => Err(malformed(format!("wrench row {i} has {} values, expected 7", row.len()))),
        })
        .collect::<Result<Vec<_>>>()?;
    let pose = rec
        .pose
        .iter()
        .enumerate()
        .map(|(i, row)| match row.as_slice() {
            &[t, px, py, pz, rx, ry, rz] => Ok(PoseSample {
                t,
                px,
                py,
                pz,
                rx: wrap_angle(rx),
                ry: wrap_angle(ry),
                rz: wrap_angle(rz),
            }),
            &[t, px, py, pz, qw, qx, qy, qz] => {
                let (rx, ry, rz) = quaternion_to_xyz(qw, qx, qy, qz);
                Ok(PoseSample { t, px, py, pz, rx, ry, rz })
            }
            _ => Err(malformed(format!("pose row {i} has {} values, expected 7 or 8", row.len()))),
        })
        .collect::<Result<Vec<_>>>()?;

    let trial = Trial {
        id: rec.id,
        subject: rec.subject,
        session: rec.session,
        food_item: canonical_item(&rec.food_item),
        label,
        source: rec.source,
        wrench,
        pose,
    };
    trial.validate().map_err(|e| match e {
        Error::UnknownFoodItem(_) => e,
        other => malformed(other.to_string()),
    })?;
    Ok(trial)
}

/// Serializes one trial as a single JSON line (no trailing newline).
pub fn trial_to_line(trial: &Trial) -> Result<String> {
    let rec = TrialRecord {
        id: trial.id.clone(),
        subject: trial.subject.clone(),
        session: trial.session,
        food_item: trial.food_item.clone(),
        source: trial.source,
        wrench: trial
            .wrench
            .iter()
            .map(|s| vec![s.t, s.fx, s.fy, s.fz, s.tx, s.ty, s.tz])
            .collect(),
        pose: trial
            .pose
            .iter()
            .map(|s| vec![s.t, s.px, s.py, s.pz, s.rx, s.ry, s.rz])
            .collect(),
    };
    Ok(serde_json::to_string(&rec)?)
}

pub fn save_trials(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for t in &ds.trials {
        writeln!(w, "{}", trial_to_line(t)?)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trial::ComplianceClass;

    fn record(item: &str, id: &str) -> String {
        format!(
            r#"{{"id":"{id}","subject":"s01","session":2,"food_item":"{item}","source":"human","wrench":[[0,0,0,1,0,0,0],[0.01,0,0,2,0,0,0.1]],"pose":[[0,0.1,0.2,0.3,0,0,0],[0.01,0.1,0.2,0.29,0,0,0]]}}"#
        )
    }

    fn write_lines(lines: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn loads_valid_records_in_order() {
        let f = write_lines(&[record("grape", "a"), record("carrot", "b"), record("egg", "c")]);
        let ds = load_trials(f.path()).unwrap();
        assert_eq!(ds.len(), 3);
        let ids: Vec<&str> = ds.trials.iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(ds.trials[0].label, ComplianceClass::HardSkin);
        assert_eq!(ds.count(ComplianceClass::Soft), 1);
        assert_eq!(ds.count(ComplianceClass::Medium), 0);
    }

    #[test]
    fn rejects_unknown_item() {
        let f = write_lines(&[record("noodles", "a")]);
        assert!(matches!(load_trials(f.path()), Err(Error::UnknownFoodItem(n)) if n == "noodles"));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = write_lines(&[record("grape", "a"), "{\"id\": 3}".to_string()]);
        assert!(matches!(load_trials(f.path()), Err(Error::MalformedRecord { line: 2, .. })));
        let bad_row = record("grape", "a").replace("[0.01,0,0,2,0,0,0.1]", "[0.01,0,0]");
        let f = write_lines(&[bad_row]);
        assert!(matches!(load_trials(f.path()), Err(Error::MalformedRecord { line: 1, .. })));
        let nan = record("grape", "a").replace("[0.01,0,0,2,0,0,0.1]", "[0.01,0,0,NaN,0,0,0.1]");
        let f = write_lines(&[nan]);
        assert!(matches!(load_trials(f.path()), Err(Error::MalformedRecord { .. })));
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = write_lines(&["".to_string()]);
        assert!(matches!(load_trials(f.path()), Err(Error::EmptyDataset)));
    }

    #[test]
    fn quaternion_rows_are_converted() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let line = format!(
            r#"{{"id":"q","subject":"s","session":1,"food_item":"apple","source":"robot","wrench":[[0,0,0,1,0,0,0],[0.01,0,0,2,0,0,0]],"pose":[[0,0,0,0,1,0,0,0],[0.01,0,0,0,{h},0,0,{h}]]}}"#
        );
        let t = parse_trial(&line, 1).unwrap();
        assert_eq!(t.source, Source::Robot);
        assert!((t.pose[1].rz - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert_eq!(t.pose[0].rx, 0.0);
    }
}
