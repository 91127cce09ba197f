use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trial::{ComplianceClass, Dataset};

/// Assignment of every trial to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    /// Whole subjects were assigned to folds instead of single trials.
    pub by_subject: bool,
    /// Trial id → fold index.
    pub assignments: BTreeMap<String, usize>,
}

impl FoldSplit {
    pub fn fold_of(&self, trial_id: &str) -> Option<usize> {
        self.assignments.get(trial_id).copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignments.values() {
            sizes[f] += 1;
        }
        sizes
    }

    /// Fold index of every trial of `ds`, in dataset order.
    pub fn folds_for(&self, ds: &Dataset) -> Result<Vec<usize>> {
        ds.trials
            .iter()
            .map(|t| {
                self.fold_of(&t.id)
                    .ok_or_else(|| Error::InvalidParameter(format!("trial '{}' is not in the split", t.id)))
            })
            .collect()
    }
}

fn check_ids(ds: &Dataset, k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k = {k}, need at least 2 folds")));
    }
    let mut seen = BTreeSet::new();
    for t in &ds.trials {
        if !seen.insert(t.id.as_str()) {
            return Err(Error::InvalidParameter(format!("duplicate trial id '{}'", t.id)));
        }
    }
    Ok(())
}

/// Seeded k-fold assignment.
///
/// Stratified splits shuffle each class separately and deal its trials
/// round-robin, continuing the deal where the previous class stopped, so
/// per-class and total fold sizes both differ by at most one.
pub fn kfold_split(ds: &Dataset, k: usize, seed: u64, stratified: bool) -> Result<FoldSplit> {
    check_ids(ds, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = BTreeMap::new();
    if stratified {
        for class in ComplianceClass::ALL {
            if ds.count(class) < k {
                return Err(Error::TooFewTrials(class));
            }
        }
        let mut next = 0;
        for class in ComplianceClass::ALL {
            let mut ids: Vec<&str> = ds
                .trials
                .iter()
                .filter(|t| t.label == class)
                .map(|t| t.id.as_str())
                .collect();
            ids.shuffle(&mut rng);
            for id in ids {
                assignments.insert(id.to_string(), next);
                next = (next + 1) % k;
            }
        }
    } else {
        if ds.len() < k {
            return Err(Error::InvalidParameter(format!("{} trials for {k} folds", ds.len())));
        }
        let mut ids: Vec<&str> = ds.trials.iter().map(|t| t.id.as_str()).collect();
        ids.shuffle(&mut rng);
        for (i, id) in ids.into_iter().enumerate() {
            assignments.insert(id.to_string(), i % k);
        }
    }
    Ok(FoldSplit {
        k,
        seed,
        stratified,
        by_subject: false,
        assignments,
    })
}

/// Seeded k-fold assignment of whole subjects, so no subject appears in both
/// training and test data.
pub fn subject_split(ds: &Dataset, k: usize, seed: u64) -> Result<FoldSplit> {
    check_ids(ds, k)?;
    let mut subjects: Vec<&str> = ds
        .trials
        .iter()
        .map(|t| t.subject.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if subjects.len() < k {
        return Err(Error::InvalidParameter(format!(
            "{} subjects for {k} folds",
            subjects.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    subjects.shuffle(&mut rng);
    let fold_of: BTreeMap<&str, usize> = subjects.iter().enumerate().map(|(i, s)| (*s, i % k)).collect();
    let assignments = ds
        .trials
        .iter()
        .map(|t| (t.id.clone(), fold_of[t.subject.as_str()]))
        .collect();
    Ok(FoldSplit {
        k,
        seed,
        stratified: false,
        by_subject: true,
        assignments,
    })
}
