//! `emgkit` command-line driver.
//!
//! Exit codes: 0 success, 1 data or runtime error, 2 usage error.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use emgkit_core::{ModelKind, SplitMode};

use config::{FeatureModeName, RunConfig};

/// Bad invocation or config; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "emgkit", version, about = "Surface-EMG hand-gesture recognition pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Summarize a dataset directory and print its digest and citation.
    Inspect(InspectArgs),
    /// Cut recordings into label-pure windows and report counts.
    Segment(SegmentArgs),
    /// Compute the feature matrix and write it as CSV.
    Extract(ExtractArgs),
    /// Rank features by extra-trees importance and keep the top k.
    Select(SelectArgs),
    /// Fit one classifier on all rows and optionally dump it as JSON.
    Train(TrainArgs),
    /// Cross-validate a classifier and write a JSON report.
    Evaluate(EvaluateArgs),
    /// Generate a seeded synthetic feature matrix.
    Synth(SynthArgs),
    /// Render evaluation reports as markdown tables.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum Precision {
    F32,
    #[default]
    F64,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: emgkit_core::EmgError| e.to_string())
}

fn parse_split(s: &str) -> Result<SplitMode, String> {
    match s {
        "stratified" => Ok(SplitMode::Stratified),
        "subject_wise" | "subject-wise" => Ok(SplitMode::SubjectWise),
        other => Err(format!("unknown split {other:?} (stratified | subject_wise)")),
    }
}

/// Input and pipeline settings shared by the data-consuming subcommands.
/// Flags override values from `--config`.
#[derive(Args, Clone, Default)]
struct PipelineArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset root directory (one subdirectory per subject).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Feature matrix CSV written by `extract` or `synth`.
    #[arg(long, conflicts_with = "data")]
    features: Option<PathBuf>,
    /// Load samples marked with the undocumented class 7 as class 0.
    #[arg(long)]
    unmark_unknown_labels: bool,
    /// Window length in samples; 0 turns each gesture segment into one window.
    #[arg(long)]
    window_len: Option<usize>,
    /// Samples between window starts.
    #[arg(long)]
    stride: Option<usize>,
    /// Average each feature over the 8 channels (20 columns instead of 160).
    #[arg(long)]
    channel_mean: bool,
    /// Percentile feature level, strictly between 0 and 100.
    #[arg(long)]
    percent: Option<f64>,
    /// Seed for fold assignment and model fitting (default 42).
    #[arg(long)]
    seed: Option<u64>,
    /// knn | gaussian_nb | decision_tree | random_forest | extra_trees
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelKind>,
    /// Neighbours for KNN.
    #[arg(long)]
    k: Option<usize>,
    /// Pick KNN k by inner cross-validation.
    #[arg(long)]
    tune_k: bool,
    /// Use raw feature values in KNN distances.
    #[arg(long)]
    no_standardize: bool,
    /// Trees in random forest / extra trees models.
    #[arg(long)]
    trees: Option<usize>,
    /// Depth limit for tree models; unlimited when absent.
    #[arg(long)]
    max_depth: Option<usize>,
    /// Use every column or the top-k ranked by importance on each training fold.
    #[arg(long, value_enum)]
    feature_mode: Option<FeatureModeName>,
    /// Features kept in selected mode.
    #[arg(long)]
    top_k: Option<usize>,
    /// Cross-validation folds.
    #[arg(long)]
    folds: Option<usize>,
    /// stratified | subject_wise
    #[arg(long, value_parser = parse_split)]
    split: Option<SplitMode>,
    /// Trees in the extra-trees ranking used for selection.
    #[arg(long)]
    selection_trees: Option<usize>,
    /// Floating-point width of features and models.
    #[arg(long, value_enum, default_value_t)]
    precision: Precision,
}

impl PipelineArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(d) = &self.data {
            c.data.root = Some(d.clone());
            c.data.features = None;
        }
        if let Some(f) = &self.features {
            c.data.features = Some(f.clone());
            c.data.root = None;
        }
        c.data.unmark_unknown_labels |= self.unmark_unknown_labels;
        if let Some(v) = self.window_len {
            c.windowing.window_len = v;
        }
        if let Some(v) = self.stride {
            c.windowing.stride = v;
        }
        c.features.channel_mean |= self.channel_mean;
        if let Some(v) = self.percent {
            c.features.percent = v;
        }
        if self.seed.is_some() {
            c.seed = self.seed;
        }
        if let Some(v) = self.model {
            c.model.kind = v;
        }
        if let Some(v) = self.k {
            c.model.k = v;
        }
        c.model.tune_k |= self.tune_k;
        if self.no_standardize {
            c.model.standardize = false;
        }
        if let Some(v) = self.trees {
            c.model.n_trees = v;
        }
        if self.max_depth.is_some() {
            c.model.max_depth = self.max_depth;
        }
        if let Some(v) = self.feature_mode {
            c.evaluation.feature_mode = v;
        }
        if let Some(v) = self.top_k {
            c.evaluation.top_k = v;
        }
        if let Some(v) = self.folds {
            c.evaluation.folds = v;
        }
        if let Some(v) = self.split {
            c.evaluation.split = v;
        }
        if let Some(v) = self.selection_trees {
            c.evaluation.selection_trees = v;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct InspectArgs {
    /// Dataset root directory.
    data: Option<PathBuf>,
    #[arg(long)]
    unmark_unknown_labels: bool,
    /// Print the summary as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SegmentArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Write per-gesture segment statistics (JSON) including length histograms.
    #[arg(long)]
    stats: bool,
    /// Output path for `--stats`; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Output JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Restrict training to the features of a `select` output.
    #[arg(long)]
    selection: Option<PathBuf>,
    /// Write the fitted model as versioned JSON.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Report JSON; stdout when neither this nor `[output].report` is set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the pooled confusion matrix as CSV.
    #[arg(long)]
    confusion_csv: Option<PathBuf>,
    /// Also write the markdown tables.
    #[arg(long)]
    markdown: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 6)]
    classes: usize,
    #[arg(long, default_value_t = 200)]
    per_class: usize,
    #[arg(long)]
    seed: u64,
    /// Class-mean offset in noise standard deviations.
    #[arg(long, default_value_t = 6.0)]
    separation: f64,
    #[arg(long, default_value_t = 10)]
    n_features: usize,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Report JSON files written by `evaluate`.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Output markdown; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("EMGKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| UsageError(format!("EMGKIT_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    match cli.command {
        Command::Inspect(a) => commands::inspect(a),
        Command::Segment(a) => commands::segment(a),
        Command::Extract(a) => commands::extract(a),
        Command::Select(a) => commands::select(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Synth(a) => commands::synth(a),
        Command::Report(a) => commands::report(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
