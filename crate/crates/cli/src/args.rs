use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "haptix", version, about = "Haptic compliance classification of food items")]
pub struct Cli {
    /// Re-execute the resolved configuration stored in a run.json.
    #[arg(long, value_name = "RUN_JSON")]
    pub replay: Option<PathBuf>,

    /// Output location for --replay (defaults to the recorded one).
    #[arg(long, requires = "replay")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate trial files and merge them into one canonical dataset.
    Ingest(IngestArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Train one classifier on a whole dataset.
    Train(TrainArgs),
    /// K-fold cross-validation.
    Evaluate(EvalArgs),
    /// Cross-validation over a comma-separated list of feature sets.
    Ablate(EvalArgs),
    /// Train on one dataset, test on another.
    CrossDomain(CrossArgs),
    /// Re-export report CSVs and compare fold accuracies across reports.
    Report(ReportArgs),
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Concurrent fold jobs (also read from HAPTIX_WORKERS).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct PipelineArgs {
    /// Lag of the pose stream behind the wrench stream, seconds.
    #[arg(long)]
    pub pose_delay: Option<f64>,
    /// Contact force threshold, newtons.
    #[arg(long)]
    pub contact_threshold: Option<f64>,
    /// Time the threshold must be held, seconds.
    #[arg(long)]
    pub contact_hold: Option<f64>,
    /// Window after contact in seconds, or `full`.
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long)]
    pub grid_len: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// hmm, svm, tcn or lstm.
    #[arg(long)]
    pub clf: Option<String>,
    /// Feature-set spec, e.g. `all`, `fz`, `force+position+deriv`.
    #[arg(long)]
    pub features: Option<String>,
    /// `class` (4 compliance classes) or `item` (12 food items).
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// adam or sgd.
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub hmm_states: Option<usize>,
    #[arg(long)]
    pub hmm_iter: Option<usize>,
    #[arg(long)]
    pub svm_c: Option<f64>,
    #[arg(long)]
    pub svm_epochs: Option<usize>,
    #[arg(long)]
    pub lstm_hidden: Option<usize>,
    /// Average the LSTM loss over every time step.
    #[arg(long)]
    pub per_step_loss: Option<bool>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long, num_args = 1..)]
    pub data: Vec<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Noise as a fraction of the signal scale.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub domain_shift: Option<f64>,
    #[arg(long)]
    pub sample_rate: Option<f64>,
    #[arg(long)]
    pub duration: Option<f64>,
    /// Keep every channel except fz independent of the class.
    #[arg(long)]
    pub fz_only: Option<bool>,
    #[arg(long)]
    pub pose_delay: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, num_args = 1..)]
    pub data: Vec<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, num_args = 1..)]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    /// `subject` keeps each subject inside one fold.
    #[arg(long)]
    pub group_by: Option<String>,
    /// Plain random folds instead of class-stratified ones.
    #[arg(long)]
    pub unstratified: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CrossArgs {
    #[arg(long = "train", num_args = 1..)]
    pub train: Vec<PathBuf>,
    #[arg(long = "test", num_args = 1..)]
    pub test: Vec<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON files written by evaluate, ablate or cross-domain.
    #[arg(long, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Significance level for Tukey's HSD.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}
