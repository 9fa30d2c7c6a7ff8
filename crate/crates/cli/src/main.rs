//! `pbd`: synthesize data, segment, train and evaluate protective-behavior
//! detectors from the command line.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pbd_core::dataio::Activity;

mod commands;
mod config;
mod report;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl From<pbd_core::Error> for CliError {
    fn from(e: pbd_core::Error) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "pbd", version, about = "Protective-behavior detection from wearable sensor recordings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded synthetic multi-rater dataset.
    Synth(SynthArgs),
    /// Segment a dataset into frames and print counts per activity and class.
    Segment(SegmentArgs),
    /// Train one model on the whole dataset and write a checkpoint.
    Train(TrainArgs),
    /// Cross-validate the pipeline and write report JSON plus confusion CSVs.
    Evaluate(EvaluateArgs),
    /// Merge report files into one summary table.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML experiment configuration; flags override its values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Root seed for every random stage.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: pbd-out].
    #[arg(long, env = "PBD_OUT_DIR", value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Dataset manifest (manifest.json written by `pbd synth`).
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct WindowArgs {
    /// Window length(s) in seconds, comma separated [default: 3].
    #[arg(long, value_delimiter = ',', value_name = "SECONDS")]
    pub window: Option<Vec<f64>>,
    /// Fraction of overlap between consecutive windows [default: 0.75].
    #[arg(long)]
    pub overlap: Option<f64>,
    /// How windows running past an instance's end are completed [default: zero].
    #[arg(long, value_enum)]
    pub padding: Option<PaddingArg>,
    /// Only use instances of this activity.
    #[arg(long, value_parser = parse_activity)]
    pub activity: Option<Activity>,
}

#[derive(Args, Debug, Clone)]
pub struct LabelArgs {
    /// Groundtruth granularity [default: binary].
    #[arg(long, value_enum)]
    pub labels: Option<LabelKind>,
    /// Rater threshold N (binary: minimum raters; tri/quad: raters for protective).
    #[arg(long)]
    pub n: Option<usize>,
    /// Protective-ratio-sum split of the quad scheme [default: 1.5].
    #[arg(long)]
    pub split: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Network architecture [default: stacked].
    #[arg(long, value_enum)]
    pub arch: Option<ArchArg>,
    /// Frame-level classifier or per-timestep labeller [default: frame-level].
    #[arg(long, value_enum)]
    pub head: Option<HeadArg>,
    /// LSTM layers per stream [default: 3].
    #[arg(long)]
    pub layers: Option<usize>,
    /// Hidden units of the stacked architecture [default: 32].
    #[arg(long)]
    pub hidden: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct TrainFlags {
    /// Training epochs [default: 100].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam learning rate [default: 0.001].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Mini-batch size [default: 20].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Epochs without training-loss improvement before stopping [default: 10].
    #[arg(long)]
    pub patience: Option<usize>,
    /// Train on the original frames only.
    #[arg(long)]
    pub no_augment: bool,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Healthy subjects [default: 12].
    #[arg(long)]
    pub n_healthy: Option<usize>,
    /// Chronic-pain subjects [default: 18].
    #[arg(long)]
    pub n_cp: Option<usize>,
    /// Total sequences, spread as one or two trials per subject [default: 46].
    #[arg(long, conflicts_with = "trials_per_subject")]
    pub trials: Option<usize>,
    /// Trials recorded by every subject (1 or 2).
    #[arg(long)]
    pub trials_per_subject: Option<usize>,
    /// Simulated raters (at least 2) [default: 4].
    #[arg(long)]
    pub rater_count: Option<usize>,
    /// Chance that a CP activity instance contains protective behavior [default: 0.6].
    #[arg(long)]
    pub prevalence: Option<f64>,
    /// Rater boundary jitter standard deviation in seconds [default: 0.25].
    #[arg(long)]
    pub jitter_sd: Option<f64>,
    /// Chance that a rater misses a protective interval [default: 0.1].
    #[arg(long)]
    pub miss_prob: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SegmentArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub labels: LabelArgs,
    /// Write every frame as a CSV row to this file.
    #[arg(long, value_name = "FILE")]
    pub dump_frames: Option<PathBuf>,
    /// Write per-frame rater ratios and fused labels to this file.
    #[arg(long, value_name = "FILE")]
    pub dump_labels: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub labels: LabelArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub labels: LabelArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Cross-validation scheme [default: loso].
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Number of LSSO folds [default: 6].
    #[arg(long)]
    pub folds: Option<usize>,
    /// LSIO test fraction [default: 0.2].
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Run one experiment per window length START:END:STEP (seconds).
    #[arg(long, value_name = "START:END:STEP", conflicts_with = "window")]
    pub window_sweep: Option<String>,
    /// Exit nonzero when any fold fails.
    #[arg(long)]
    pub strict: bool,
    /// Folds trained in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Report JSON files written by `pbd evaluate`.
    pub reports: Vec<PathBuf>,
    /// Output directory for summary.csv and summary.txt [default: pbd-out].
    #[arg(long, env = "PBD_OUT_DIR", value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PaddingArg {
    Zero,
    Last,
    Next,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LabelKind {
    Binary,
    Tri,
    Quad,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ArchArg {
    Stacked,
    DualStream,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum HeadArg {
    FrameLevel,
    PerTimestep,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SchemeArg {
    Loso,
    Lsso,
    Lsio,
}

fn parse_activity(s: &str) -> Result<Activity, String> {
    s.parse::<Activity>().map_err(|_| {
        let names: Vec<&str> = Activity::ALL.iter().map(|a| a.slug()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Segment(a) => commands::segment(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Report(a) => report::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
