use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::Target;
use crate::error::Result;
use crate::trial::{ComplianceClass, FOOD_ITEMS, NUM_CLASSES};

/// One held-out prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub trial_id: String,
    pub fold: usize,
    pub item: Option<String>,
    /// Label indices under the run's target.
    pub truth: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classifier: String,
    pub feature_set: String,
    pub target: Target,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Sample standard deviation over folds (0 for a single fold).
    pub std_accuracy: f64,
    /// Rows are true classes, columns predicted classes.
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
    pub confusion_normalized: [[f64; NUM_CLASSES]; NUM_CLASSES],
    /// 12 × 12 item confusion, present for item-level runs.
    pub item_confusion: Option<Vec<Vec<usize>>>,
    pub predictions: Vec<Prediction>,
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl EvalReport {
    pub fn from_predictions(
        classifier: impl Into<String>,
        feature_set: impl Into<String>,
        target: Target,
        folds: usize,
        predictions: Vec<Prediction>,
    ) -> Self {
        let mut correct = vec![0usize; folds];
        let mut total = vec![0usize; folds];
        let mut confusion = [[0usize; NUM_CLASSES]; NUM_CLASSES];
        let mut items = vec![vec![0usize; FOOD_ITEMS.len()]; FOOD_ITEMS.len()];
        for p in &predictions {
            total[p.fold] += 1;
            correct[p.fold] += usize::from(p.truth == p.predicted);
            let (t, q) = (target.class_of(p.truth), target.class_of(p.predicted));
            confusion[t.index()][q.index()] += 1;
            if target == Target::Item {
                items[p.truth][p.predicted] += 1;
            }
        }
        let fold_accuracies: Vec<f64> = correct
            .iter()
            .zip(&total)
            .map(|(&c, &n)| if n == 0 { 0.0 } else { c as f64 / n as f64 })
            .collect();
        let (mean_accuracy, std_accuracy) = mean_std(&fold_accuracies);
        let mut confusion_normalized = [[0.0; NUM_CLASSES]; NUM_CLASSES];
        for (row, out) in confusion.iter().zip(confusion_normalized.iter_mut()) {
            let n: usize = row.iter().sum();
            if n > 0 {
                for (c, o) in row.iter().zip(out.iter_mut()) {
                    *o = *c as f64 / n as f64;
                }
            }
        }
        EvalReport {
            classifier: classifier.into(),
            feature_set: feature_set.into(),
            target,
            fold_accuracies,
            mean_accuracy,
            std_accuracy,
            confusion,
            confusion_normalized,
            item_confusion: (target == Target::Item).then_some(items),
            predictions,
        }
    }

    /// Pooled accuracy, `trace(confusion) / total` for class targets.
    pub fn accuracy(&self) -> f64 {
        let n = self.predictions.len();
        if n == 0 {
            return 0.0;
        }
        self.predictions.iter().filter(|p| p.truth == p.predicted).count() as f64 / n as f64
    }

    /// Confusion mass by distance `|true − predicted|` between classes.
    pub fn confusion_by_distance(&self) -> [usize; NUM_CLASSES] {
        let mut out = [0; NUM_CLASSES];
        for (i, row) in self.confusion.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                out[i.abs_diff(j)] += c;
            }
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "{} [{}]: {:.4} ± {:.4}",
            self.classifier, self.feature_set, self.mean_accuracy, self.std_accuracy
        )
    }

    /// File-name stem, e.g. `tcn_force+deriv`.
    pub fn stem(&self) -> String {
        let fs: String = self
            .feature_set
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '+' || c == '-' { c } else { '_' })
            .collect();
        match self.target {
            Target::Class => format!("{}_{}", self.classifier, fs),
            Target::Item => format!("{}_{}_items", self.classifier, fs),
        }
    }

    pub fn confusion_csv(&self) -> String {
        matrix_csv(
            &ComplianceClass::ALL.map(|c| c.name()),
            self.confusion.iter().map(|r| r.iter().map(|c| c.to_string()).collect()),
        )
    }

    pub fn confusion_normalized_csv(&self) -> String {
        matrix_csv(
            &ComplianceClass::ALL.map(|c| c.name()),
            self.confusion_normalized
                .iter()
                .map(|r| r.iter().map(|c| c.to_string()).collect()),
        )
    }

    pub fn item_confusion_csv(&self) -> Option<String> {
        let names: Vec<&str> = FOOD_ITEMS.iter().map(|(n, _)| *n).collect();
        self.item_confusion
            .as_ref()
            .map(|m| matrix_csv(&names, m.iter().map(|r| r.iter().map(|c| c.to_string()).collect())))
    }

    pub fn folds_csv(&self) -> String {
        let mut total = vec![0usize; self.fold_accuracies.len()];
        for p in &self.predictions {
            total[p.fold] += 1;
        }
        let mut s = String::from("fold,n_test,accuracy\n");
        for (i, (a, n)) in self.fold_accuracies.iter().zip(total).enumerate() {
            let _ = writeln!(s, "{i},{n},{a}");
        }
        s
    }

    /// Writes `<stem>.json` and the CSV tables into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let stem = self.stem();
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(self)?)?;
        std::fs::write(dir.join(format!("{stem}_confusion.csv")), self.confusion_csv())?;
        std::fs::write(
            dir.join(format!("{stem}_confusion_normalized.csv")),
            self.confusion_normalized_csv(),
        )?;
        std::fs::write(dir.join(format!("{stem}_folds.csv")), self.folds_csv())?;
        if let Some(items) = self.item_confusion_csv() {
            std::fs::write(dir.join(format!("{stem}_item_confusion.csv")), items)?;
        }
        Ok(())
    }
}

fn matrix_csv<S: AsRef<str>>(names: &[S], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut s = String::from("true\\predicted");
    for n in names {
        s.push(',');
        s.push_str(n.as_ref());
    }
    s.push('\n');
    for (name, row) in names.iter().zip(rows) {
        s.push_str(name.as_ref());
        for v in row {
            s.push(',');
            s.push_str(&v);
        }
        s.push('\n');
    }
    s
}

/// One line of a feature-ablation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub feature_set: String,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from("rank,feature_set,mean_accuracy,std_accuracy\n");
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(s, "{},{},{},{}", i + 1, r.feature_set, r.mean_accuracy, r.std_accuracy);
    }
    s
}
