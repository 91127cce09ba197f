use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{AblationRow, EvalReport, Prediction};
use super::split::FoldSplit;
use crate::classifier::{Learner, Target};
use crate::error::{Error, Result};
use crate::preprocess::{fit_norm, prepare_dataset, FeatureMatrix, FeatureSet, PipelineConfig};
use crate::trial::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub pipeline: PipelineConfig,
    pub target: Target,
    /// Number of folds trained concurrently.
    pub workers: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            pipeline: PipelineConfig::default(),
            target: Target::Class,
            workers: 1,
        }
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))
}

/// Normalizes with statistics of `train` only, fits, and predicts `test`.
fn fit_and_predict(
    learner: &dyn Learner,
    train: &[FeatureMatrix],
    test: &[&FeatureMatrix],
    target: Target,
) -> Result<Vec<(usize, usize)>> {
    let stats = fit_norm(train)?;
    let train_n = train.iter().map(|fm| stats.apply(fm)).collect::<Result<Vec<_>>>()?;
    let model = learner.fit(&train_n, target)?;
    test.iter()
        .map(|fm| {
            let truth = target.label_of(fm)?;
            Ok((truth, model.predict(&stats.apply(fm)?)?))
        })
        .collect()
}

/// Cross-validates `learner` over the folds of `split`.
pub fn run_cv(
    ds: &Dataset,
    learner: &dyn Learner,
    fs: &FeatureSet,
    split: &FoldSplit,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let fms = prepare_dataset(ds, &opts.pipeline, fs)?;
    run_cv_prepared(ds, &fms, learner, &fs.id(), split, opts)
}

pub(crate) fn run_cv_prepared(
    ds: &Dataset,
    fms: &[FeatureMatrix],
    learner: &dyn Learner,
    feature_id: &str,
    split: &FoldSplit,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let folds = split.folds_for(ds)?;
    let jobs = pool(opts.workers)?.install(|| {
        (0..split.k)
            .into_par_iter()
            .map(|f| {
                let train: Vec<FeatureMatrix> = fms
                    .iter()
                    .zip(&folds)
                    .filter(|(_, &g)| g != f)
                    .map(|(fm, _)| fm.clone())
                    .collect();
                let test_idx: Vec<usize> = (0..fms.len()).filter(|&i| folds[i] == f).collect();
                if test_idx.is_empty() {
                    return Err(Error::InvalidParameter("empty test fold".into()).in_fold(f));
                }
                let test: Vec<&FeatureMatrix> = test_idx.iter().map(|&i| &fms[i]).collect();
                let out = fit_and_predict(learner, &train, &test, opts.target).map_err(|e| e.in_fold(f))?;
                Ok(test_idx.into_iter().zip(out).collect::<Vec<_>>())
            })
            .collect::<Vec<Result<_>>>()
    });
    let mut predictions = Vec::with_capacity(fms.len());
    for (f, job) in jobs.into_iter().enumerate() {
        for (i, (truth, predicted)) in job? {
            predictions.push(Prediction {
                trial_id: ds.trials[i].id.clone(),
                fold: f,
                item: Some(ds.trials[i].food_item.clone()),
                truth,
                predicted,
            });
        }
    }
    Ok(EvalReport::from_predictions(
        learner.id(),
        feature_id,
        opts.target,
        split.k,
        predictions,
    ))
}

/// One cross-validation per feature set on identical folds, best first.
/// Ties keep the input order.
pub fn ablate_features(
    ds: &Dataset,
    learner: &dyn Learner,
    feature_sets: &[FeatureSet],
    split: &FoldSplit,
    opts: &EvalOptions,
) -> Result<Vec<(AblationRow, EvalReport)>> {
    if feature_sets.is_empty() {
        return Err(Error::InvalidParameter("no feature sets to compare".into()));
    }
    let mut rows = feature_sets
        .iter()
        .map(|fs| {
            let report = run_cv(ds, learner, fs, split, opts)?;
            let row = AblationRow {
                feature_set: fs.id(),
                mean_accuracy: report.mean_accuracy,
                std_accuracy: report.std_accuracy,
                fold_accuracies: report.fold_accuracies.clone(),
            };
            Ok((row, report))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.0.mean_accuracy.total_cmp(&a.0.mean_accuracy));
    Ok(rows)
}

/// Trains once on all of `train_ds` and evaluates on all of `test_ds`.
pub fn cross_domain_eval(
    train_ds: &Dataset,
    test_ds: &Dataset,
    learner: &dyn Learner,
    fs: &FeatureSet,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let train = prepare_dataset(train_ds, &opts.pipeline, fs)?;
    let test = prepare_dataset(test_ds, &opts.pipeline, fs)?;
    let ids: Vec<(String, String)> = test_ds
        .trials
        .iter()
        .map(|t| (t.id.clone(), t.food_item.clone()))
        .collect();
    transfer_eval(&train, &test, &ids, learner, &fs.id(), opts.target)
}

/// [`cross_domain_eval`] on prepared matrices. The two sides must share the
/// exact channel list.
pub fn transfer_eval(
    train: &[FeatureMatrix],
    test: &[FeatureMatrix],
    ids: &[(String, String)],
    learner: &dyn Learner,
    feature_id: &str,
    target: Target,
) -> Result<EvalReport> {
    let (Some(a), Some(b)) = (train.first(), test.first()) else {
        return Err(Error::EmptyTrainingSet);
    };
    if a.channel_names != b.channel_names {
        return Err(Error::dims(a.channel_names.join(","), b.channel_names.join(",")));
    }
    let refs: Vec<&FeatureMatrix> = test.iter().collect();
    let out = fit_and_predict(learner, train, &refs, target)?;
    let predictions = out
        .into_iter()
        .zip(ids)
        .map(|((truth, predicted), (id, item))| Prediction {
            trial_id: id.clone(),
            fold: 0,
            item: Some(item.clone()),
            truth,
            predicted,
        })
        .collect();
    Ok(EvalReport::from_predictions(learner.id(), feature_id, target, 1, predictions))
}
