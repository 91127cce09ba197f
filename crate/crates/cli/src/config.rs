//! Resolution of flags, config file, environment and defaults into one
//! [`RunConfig`], which is also what run.json stores.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use haptix::classifier::{ClassifierSpec, Target};
use haptix::nn::Optimizer;
use haptix::preprocess::{FeatureSet, PipelineConfig};
use haptix::synth::GenConfig;
use serde::{Deserialize, Serialize};

use crate::args::{Command, Common, ModelArgs, PipelineArgs};
use crate::error::CliError;

pub const WORKERS_ENV: &str = "HAPTIX_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Ingest,
    Synth,
    Train,
    Evaluate,
    Ablate,
    CrossDomain,
    Report,
}

/// Fully resolved configuration of one run, defaults included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub data: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test_data: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classifier: Option<ClassifierSpec>,
    /// Canonical feature-set ids; more than one only for ablation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub features: Vec<String>,
    #[serde(default)]
    pub target: Target,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<PipelineConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default)]
    pub stratified: bool,
    #[serde(default)]
    pub group_by_subject: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<GenConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

/// Parses a flat `key = value` file. `#` starts a comment; keys may use `-`
/// or `_`.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
        out.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(out)
}

/// Flag → config file → fallback lookup.
struct Layers {
    file: BTreeMap<String, String>,
    used: std::cell::RefCell<Vec<String>>,
}

impl Layers {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Data(format!("config {}: {e}", p.display())))?;
                parse_config_file(&text)?
            }
            None => BTreeMap::new(),
        };
        Ok(Layers { file, used: Default::default() })
    }

    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        self.used.borrow_mut().push(key.to_string());
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("config key `{key}`: cannot parse `{v}`"))),
            None => Ok(None),
        }
    }

    fn paths(&self, flag: &[PathBuf], key: &str) -> Vec<PathBuf> {
        self.used.borrow_mut().push(key.to_string());
        if !flag.is_empty() {
            return flag.to_vec();
        }
        self.file
            .get(key)
            .map(|v| v.split(',').map(|s| PathBuf::from(s.trim())).collect())
            .unwrap_or_default()
    }

    /// Rejects config keys that the command never looked at.
    fn finish(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        if let Some(k) = self.file.keys().find(|k| !used.contains(k)) {
            return Err(CliError::Usage(format!("unknown config key `{k}` for this command")));
        }
        Ok(())
    }
}

fn workers(layers: &Layers, flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(w) = layers.pick(flag, "workers")? {
        return positive(w, "workers");
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let w = v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{WORKERS_ENV}: cannot parse `{v}`")))?;
        return positive(w, WORKERS_ENV);
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn positive(v: usize, what: &str) -> Result<usize, CliError> {
    if v == 0 {
        return Err(CliError::Usage(format!("{what} must be at least 1")));
    }
    Ok(v)
}

fn pipeline(layers: &Layers, a: &PipelineArgs) -> Result<PipelineConfig, CliError> {
    let d = PipelineConfig::default();
    let window = match layers.pick(a.window.clone(), "window")? {
        None => d.window,
        Some(w) if matches!(w.as_str(), "full" | "none") => None,
        Some(w) => Some(
            w.parse::<f64>()
                .ok()
                .filter(|v| *v > 0.0)
                .ok_or_else(|| CliError::Usage(format!("--window: expected seconds or `full`, got `{w}`")))?,
        ),
    };
    Ok(PipelineConfig {
        pose_delay: layers.pick(a.pose_delay, "pose_delay")?.unwrap_or(d.pose_delay),
        contact_threshold: layers.pick(a.contact_threshold, "contact_threshold")?.unwrap_or(d.contact_threshold),
        contact_hold: layers.pick(a.contact_hold, "contact_hold")?.unwrap_or(d.contact_hold),
        window,
        grid_len: layers.pick(a.grid_len, "grid_len")?.unwrap_or(d.grid_len),
    })
}

fn classifier(layers: &Layers, a: &ModelArgs, seed: u64) -> Result<(ClassifierSpec, Target), CliError> {
    let name = layers.pick(a.clf.clone(), "clf")?.unwrap_or_else(|| "tcn".into());
    let mut spec = ClassifierSpec::from_name(&name).map_err(|e| CliError::Usage(e.to_string()))?;
    spec.set_seed(seed);
    let epochs = layers.pick(a.epochs, "epochs")?;
    let lr = layers.pick(a.lr, "lr")?;
    let batch = layers.pick(a.batch_size, "batch_size")?;
    let optimizer = layers.pick(a.optimizer.clone(), "optimizer")?;
    if let Some(t) = spec.train_config_mut() {
        if let Some(e) = epochs {
            t.epochs = e;
        }
        if let Some(lr) = lr {
            t.lr = lr;
        }
        if let Some(b) = batch {
            t.batch_size = b;
        }
        match optimizer.as_deref() {
            None | Some("adam") => {}
            Some("sgd") => t.optimizer = Optimizer::Sgd,
            Some(o) => return Err(CliError::Usage(format!("unknown optimizer `{o}`"))),
        }
    }
    let hmm_states = layers.pick(a.hmm_states, "hmm_states")?;
    let hmm_iter = layers.pick(a.hmm_iter, "hmm_iter")?;
    let svm_c = layers.pick(a.svm_c, "svm_c")?;
    let svm_epochs = layers.pick(a.svm_epochs, "svm_epochs")?;
    let lstm_hidden = layers.pick(a.lstm_hidden, "lstm_hidden")?;
    let per_step = layers.pick(a.per_step_loss, "per_step_loss")?;
    match &mut spec {
        ClassifierSpec::Hmm(bw) => {
            if let Some(k) = hmm_states {
                bw.n_states = k;
            }
            if let Some(i) = hmm_iter {
                bw.max_iter = i;
            }
        }
        ClassifierSpec::Svm(p) => {
            if let Some(c) = svm_c {
                p.c = c;
            }
            if let Some(e) = svm_epochs {
                p.epochs = e;
            }
        }
        ClassifierSpec::Lstm(s) => {
            if let Some(h) = lstm_hidden {
                s.hidden = h;
            }
            if let Some(p) = per_step {
                s.per_step_loss = p;
            }
        }
        ClassifierSpec::Tcn(_) => {}
    }
    let target = match layers.pick(a.target.clone(), "target")?.as_deref() {
        None | Some("class") => Target::Class,
        Some("item") => Target::Item,
        Some(t) => return Err(CliError::Usage(format!("unknown target `{t}`"))),
    };
    Ok((spec, target))
}

fn feature_ids(layers: &Layers, a: &ModelArgs, list: bool) -> Result<Vec<String>, CliError> {
    let spec = layers.pick(a.features.clone(), "features")?.unwrap_or_else(|| "all".into());
    let parts: Vec<&str> = if list { spec.split(',').collect() } else { vec![spec.as_str()] };
    parts
        .into_iter()
        .map(|p| {
            FeatureSet::parse(p)
                .map(|fs| fs.id())
                .map_err(|e| CliError::Usage(e.to_string()))
        })
        .collect()
}

fn out_dir(layers: &Layers, c: &Common, default: &str) -> Result<PathBuf, CliError> {
    Ok(layers.pick(c.out.clone(), "out")?.unwrap_or_else(|| PathBuf::from(default)))
}

fn need(paths: &[PathBuf], what: &str) -> Result<(), CliError> {
    if paths.is_empty() {
        return Err(CliError::Usage(format!("missing {what}")));
    }
    Ok(())
}

/// Builds the run configuration for a parsed subcommand.
pub fn resolve(cmd: &Command) -> Result<RunConfig, CliError> {
    let common = match cmd {
        Command::Ingest(a) => &a.common,
        Command::Synth(a) => &a.common,
        Command::Train(a) => &a.common,
        Command::Evaluate(a) | Command::Ablate(a) => &a.common,
        Command::CrossDomain(a) => &a.common,
        Command::Report(a) => &a.common,
    };
    let layers = Layers::load(common.config.as_deref())?;
    let seed = layers.pick(common.seed, "seed")?.unwrap_or(0);
    let workers = workers(&layers, common.workers)?;
    let mut rc = RunConfig {
        command: CommandKind::Ingest,
        data: Vec::new(),
        test_data: Vec::new(),
        inputs: Vec::new(),
        out: PathBuf::new(),
        seed,
        workers,
        classifier: None,
        features: Vec::new(),
        target: Target::Class,
        pipeline: None,
        k: None,
        stratified: false,
        group_by_subject: false,
        synth: None,
        alpha: None,
    };
    match cmd {
        Command::Ingest(a) => {
            rc.data = layers.paths(&a.data, "data");
            need(&rc.data, "--data")?;
            rc.out = out_dir(&layers, common, "ingest")?;
        }
        Command::Synth(a) => {
            rc.command = CommandKind::Synth;
            let d = GenConfig::default();
            rc.synth = Some(GenConfig {
                trials_per_class: layers.pick(a.per_class, "per_class")?.unwrap_or(d.trials_per_class),
                noise_std: layers.pick(a.noise, "noise")?.unwrap_or(d.noise_std),
                sample_rate: layers.pick(a.sample_rate, "sample_rate")?.unwrap_or(d.sample_rate),
                duration: layers.pick(a.duration, "duration")?.unwrap_or(d.duration),
                domain_shift: layers.pick(a.domain_shift, "domain_shift")?.unwrap_or(d.domain_shift),
                seed,
                pose_delay: layers.pick(a.pose_delay, "pose_delay")?.unwrap_or(d.pose_delay),
                fz_only_signal: layers.pick(a.fz_only, "fz_only")?.unwrap_or(false),
            });
            rc.out = out_dir(&layers, common, "synth.jsonl")?;
        }
        Command::Train(a) => {
            rc.command = CommandKind::Train;
            rc.data = layers.paths(&a.data, "data");
            need(&rc.data, "--data")?;
            let (spec, target) = classifier(&layers, &a.model, seed)?;
            rc.classifier = Some(spec);
            rc.target = target;
            rc.features = feature_ids(&layers, &a.model, false)?;
            rc.pipeline = Some(pipeline(&layers, &a.pipeline)?);
            rc.out = out_dir(&layers, common, "model")?;
        }
        Command::Evaluate(a) | Command::Ablate(a) => {
            let ablate = matches!(cmd, Command::Ablate(_));
            rc.command = if ablate { CommandKind::Ablate } else { CommandKind::Evaluate };
            rc.data = layers.paths(&a.data, "data");
            need(&rc.data, "--data")?;
            let (spec, target) = classifier(&layers, &a.model, seed)?;
            rc.classifier = Some(spec);
            rc.target = target;
            rc.features = feature_ids(&layers, &a.model, ablate)?;
            rc.pipeline = Some(pipeline(&layers, &a.pipeline)?);
            rc.k = Some(layers.pick(a.k, "k")?.unwrap_or(3));
            rc.group_by_subject = match layers.pick(a.group_by.clone(), "group_by")?.as_deref() {
                None | Some("none") => false,
                Some("subject") => true,
                Some(g) => return Err(CliError::Usage(format!("unknown --group-by `{g}`"))),
            };
            let unstratified = layers.pick(a.unstratified.then_some(true), "unstratified")?.unwrap_or(false);
            rc.stratified = !unstratified && !rc.group_by_subject;
            rc.out = out_dir(&layers, common, "results")?;
        }
        Command::CrossDomain(a) => {
            rc.command = CommandKind::CrossDomain;
            rc.data = layers.paths(&a.train, "train");
            rc.test_data = layers.paths(&a.test, "test");
            need(&rc.data, "--train")?;
            need(&rc.test_data, "--test")?;
            let (spec, target) = classifier(&layers, &a.model, seed)?;
            rc.classifier = Some(spec);
            rc.target = target;
            rc.features = feature_ids(&layers, &a.model, false)?;
            rc.pipeline = Some(pipeline(&layers, &a.pipeline)?);
            rc.out = out_dir(&layers, common, "cross_domain")?;
        }
        Command::Report(a) => {
            rc.command = CommandKind::Report;
            rc.inputs = layers.paths(&a.inputs, "inputs");
            need(&rc.inputs, "--inputs")?;
            rc.alpha = Some(layers.pick(a.alpha, "alpha")?.unwrap_or(0.05));
            rc.out = out_dir(&layers, common, "report")?;
        }
    }
    layers.finish()?;
    Ok(rc)
}
