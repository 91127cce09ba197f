//! Execution of a resolved [`RunConfig`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use haptix::classifier::{ClassifierSpec, Target, TrainedClassifier};
use haptix::eval::{
    ablate_features, ablation_csv, anova_oneway, cross_domain_eval, kfold_split, run_cv,
    subject_split, ttest_welch, tukey_hsd, EvalOptions, EvalReport,
};
use haptix::io::{load_trials, save_trials};
use haptix::preprocess::{fit_norm, prepare_dataset, FeatureSet, NormStats, PipelineConfig};
use haptix::synth::generate;
use haptix::trial::{ComplianceClass, Dataset};
use serde::{Deserialize, Serialize};

use crate::config::{CommandKind, RunConfig};
use crate::error::CliError;

/// Everything needed to apply a trained classifier to new trials.
#[derive(Debug, Serialize, Deserialize)]
pub struct SavedModel {
    pub feature_set: String,
    pub pipeline: PipelineConfig,
    pub target: Target,
    pub norm: NormStats,
    pub classifier: TrainedClassifier,
}

#[derive(Debug, Serialize)]
struct IngestSummary {
    files: Vec<PathBuf>,
    trials: usize,
    class_counts: Vec<(String, usize)>,
    subjects: Vec<String>,
}

/// Where run.json goes: inside the output directory, or beside the data
/// file for `synth`.
pub fn run_json_path(rc: &RunConfig) -> PathBuf {
    match rc.command {
        CommandKind::Synth => {
            let stem = rc.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            rc.out.with_file_name(format!("{stem}.run.json"))
        }
        _ => rc.out.join("run.json"),
    }
}

fn check_inputs(rc: &RunConfig) -> Result<(), CliError> {
    for p in rc.data.iter().chain(&rc.test_data).chain(&rc.inputs) {
        if !p.is_file() {
            return Err(CliError::Data(format!("input file not found: {}", p.display())));
        }
    }
    Ok(())
}

fn load_all(paths: &[PathBuf]) -> Result<Dataset, CliError> {
    let mut trials = Vec::new();
    for p in paths {
        let ds = load_trials(p).map_err(|e| CliError::from(e).context(p))?;
        trials.extend(ds.trials);
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(t) = trials.iter().find(|t| !seen.insert(t.id.clone())) {
        return Err(CliError::Data(format!("duplicate trial id `{}`", t.id)));
    }
    Ok(Dataset::new(trials))
}

fn feature_sets(rc: &RunConfig) -> Result<Vec<FeatureSet>, CliError> {
    rc.features.iter().map(|f| FeatureSet::parse(f).map_err(CliError::from)).collect()
}

fn spec(rc: &RunConfig) -> Result<&ClassifierSpec, CliError> {
    rc.classifier
        .as_ref()
        .ok_or_else(|| CliError::Usage("run configuration has no classifier".into()))
}

fn options(rc: &RunConfig) -> EvalOptions {
    EvalOptions {
        pipeline: rc.pipeline.clone().unwrap_or_default(),
        target: rc.target,
        workers: rc.workers,
    }
}

/// Runs the command and returns the lines to print on stdout.
pub fn execute(rc: &RunConfig) -> Result<Vec<String>, CliError> {
    check_inputs(rc)?;
    let out_dir = match rc.command {
        CommandKind::Synth => rc.out.parent().map(Path::to_path_buf).unwrap_or_default(),
        _ => rc.out.clone(),
    };
    if !out_dir.as_os_str().is_empty() {
        std::fs::create_dir_all(&out_dir)?;
    }
    let lines = match rc.command {
        CommandKind::Ingest => ingest(rc)?,
        CommandKind::Synth => synth(rc)?,
        CommandKind::Train => train(rc)?,
        CommandKind::Evaluate => evaluate(rc)?,
        CommandKind::Ablate => ablate(rc)?,
        CommandKind::CrossDomain => cross_domain(rc)?,
        CommandKind::Report => report(rc)?,
    };
    std::fs::write(run_json_path(rc), serde_json::to_string_pretty(rc)? + "\n")?;
    Ok(lines)
}

fn ingest(rc: &RunConfig) -> Result<Vec<String>, CliError> {
    let ds = load_all(&rc.data)?;
    save_trials(rc.out.join("dataset.jsonl"), &ds)?;
    let mut subjects: Vec<String> = ds.trials.iter().map(|t| t.subject.clone()).collect();
    subjects.sort();
    subjects.dedup();
    let summary = IngestSummary {
        files: rc.data.clone(),
        trials: ds.len(),
        class_counts: ComplianceClass::ALL.iter().map(|c| (c.name().to_string(), ds.count(*c))).collect(),
        subjects,
    };
    std::fs::write(rc.out.join("ingest_summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(vec![format!("ingested {} trials from {} file(s)", ds.len(), rc.data.len())])
}

fn synth(rc: &RunConfig) -> Result<Vec<String>, CliError> {
    let cfg = rc
        .synth
        .as_ref()
        .ok_or_else(|| CliError::Usage("run configuration has no generator settings".into()))?;
    let ds = generate(cfg)?;
    save_trials(&rc.out, &ds)?;
    Ok(vec![format!("wrote {} synthetic trials to {}", ds.len(), rc.out.display())])
}

fn train(rc: &RunConfig) -> Result<Vec<String>, CliError> {
    let ds = load_all(&rc.data)?;
    let fs = FeatureSet::parse(&rc.features[0])?;
    let pipeline = rc.pipeline.clone().unwrap_or_default();
    let fms = prepare_dataset(&ds, &pipeline, &fs)?;
    let norm = fit_norm(&fms)?;
    let fms = fms.iter().map(|fm| norm.apply(fm)).collect::<haptix::Result<Vec<_>>>()?;
    let (classifier, curve) = spec(rc)?.train_logged(&fms, rc.target)?;
    let saved = SavedModel { feature_set: fs.id(), pipeline, target: rc.target, norm, classifier };
    std::fs::write(rc.out.join("model.json"), serde_json::to_string(&saved)?)?;
    let mut csv = String::from("epoch,mean_loss\n");
    for (i, l) in curve.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", i + 1, l);
    }
    std::fs::write(rc.out.join("loss_curve.csv"), csv)?;
    Ok(vec![format!("trained {} [{}] on {} trials", spec(rc)?.name(), fs.id(), ds.len())])
}

fn split_for(rc: &RunConfig, ds: &Dataset) -> Result<haptix::eval::FoldSplit, CliError> {
    let k = rc.k.unwrap_or(3);
    Ok(if rc.group_by_subject {
        subject_split(ds, k, rc.seed)?
    } else {
        kfold_split(ds, k, rc.seed, rc.stratified)?
    })
}

fn evaluate(rc: &RunConfig) -> Result<Vec<String>, CliError> {
    let ds = load_all(&rc.data)?;
    let fs = FeatureSet::parse(&rc.features[0])?;
    let report = run_cv(&ds, spec(rc)?, &fs, &split_for(rc, &ds)?, &options(rc))?;
    report.write(&rc.out)?;
    Ok(vec![report.summary()])
}

fn ablate(rc: &RunConfig) -> Result<Vec<String>, CliError> {
    let ds = load_all(&rc.data)?;
    let sets = feature_sets(rc)?;
    let rows = ablate_features(&ds, spec(rc)?, &sets, &split_for(rc, &ds)?, &options(rc))?;
    let table: Vec<_> = rows.iter().map(|(r, _)| r.clone()).collect();
    let csv = ablation_csv(&table);
    std::fs::write(rc.out.join("ablation.csv"), &csv)?;
    for (_, report) in &rows {
        report.write(&rc.out)?;
    }
    Ok(csv.lines().map(str::to_string).collect())
}

fn cross_domain(rc: &RunConfig) -> Result<Vec<String>, CliError> {
    let train = load_all(&rc.data)?;
    let test = load_all(&rc.test_data)?;
    let fs = FeatureSet::parse(&rc.features[0])?;
    let report = cross_domain_eval(&train, &test, spec(rc)?, &fs, &options(rc))?;
    report.write(&rc.out)?;
    Ok(vec![report.summary()])
}

fn report(rc: &RunConfig) -> Result<Vec<String>, CliError> {
    let mut reports = Vec::new();
    for p in &rc.inputs {
        let text = std::fs::read_to_string(p)?;
        let r: EvalReport = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: not a report: {e}", p.display())))?;
        r.write(&rc.out)?;
        reports.push(r);
    }
    let mut lines: Vec<String> = reports.iter().map(EvalReport::summary).collect();
    if reports.len() >= 2 {
        let names: Vec<String> = rc
            .inputs
            .iter()
            .map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
            .collect();
        let groups: Vec<Vec<f64>> = reports.iter().map(|r| r.fold_accuracies.clone()).collect();
        let csv = comparison_csv(&names, &groups, rc.alpha.unwrap_or(0.05))?;
        std::fs::write(rc.out.join("comparison.csv"), &csv)?;
        lines.extend(csv.lines().map(str::to_string));
    }
    Ok(lines)
}

/// ANOVA and Tukey HSD over fold accuracies, plus Welch's t for two reports.
fn comparison_csv(names: &[String], groups: &[Vec<f64>], alpha: f64) -> Result<String, CliError> {
    let mut s = String::from("test,a,b,statistic,df,p,significant\n");
    let an = anova_oneway(groups)?;
    let _ = writeln!(
        s,
        "anova,all,,{},{} {},{},{}",
        an.f,
        an.df_between,
        an.df_within,
        an.p,
        an.p < alpha
    );
    for pair in tukey_hsd(groups, alpha)? {
        let _ = writeln!(
            s,
            "tukey,{},{},{},,{},{}",
            names[pair.i], names[pair.j], pair.q, pair.p, pair.significant
        );
    }
    if groups.len() == 2 {
        let t = ttest_welch(&groups[0], &groups[1])?;
        let _ = writeln!(s, "welch_t,{},{},{},{},{},{}", names[0], names[1], t.t, t.df, t.p, t.p < alpha);
    }
    Ok(s)
}

impl CliError {
    fn context(self, path: &Path) -> Self {
        let with = |m: String| format!("{}: {m}", path.display());
        match self {
            CliError::Usage(m) => CliError::Usage(with(m)),
            CliError::Data(m) => CliError::Data(with(m)),
            CliError::Numerical(m) => CliError::Numerical(with(m)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparison_table_has_one_row_per_pair() {
        let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let groups = vec![vec![0.8, 0.82, 0.81], vec![0.7, 0.72, 0.71], vec![0.8, 0.81, 0.83]];
        let csv = comparison_csv(&names, &groups, 0.05).unwrap();
        assert_eq!(csv.lines().count(), 1 + 1 + 3);
        let two = comparison_csv(&names[..2], &groups[..2], 0.05).unwrap();
        assert!(two.lines().last().unwrap().starts_with("welch_t,a,b,"));
    }

    #[test]
    fn synth_run_json_sits_beside_the_data() {
        let cli = <crate::args::Cli as clap::Parser>::try_parse_from([
            "haptix", "synth", "--out", "dir/data.jsonl", "--workers", "1",
        ])
        .unwrap();
        let rc = crate::config::resolve(cli.command.as_ref().unwrap()).unwrap();
        assert_eq!(run_json_path(&rc), PathBuf::from("dir/data.run.json"));
    }
}
