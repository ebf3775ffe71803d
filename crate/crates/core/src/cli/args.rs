use std::ops::Range;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hybrid_cascade::classifiers::{KernelKind, Strategy};
use hybrid_cascade::datasets::DatasetFormat;

#[derive(Debug, Parser)]
#[command(name = "hybrid-cascade", version, about = "Budgeted DS1/DS2 cascade classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate, inspect or split datasets.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Image descriptors.
    #[command(subcommand)]
    Features(FeaturesCommand),
    /// Train a multiclass SVM on Z1, selecting C and gamma on Z2.
    Train(TrainArgs),
    /// Estimate DS1's error histogram on Z2.
    Calibrate(CalibrateArgs),
    /// Classify Z3 with DS1 and send a budgeted subset to DS2.
    Route(RouteArgs),
    /// Run the repeated protocol described by a config file.
    Evaluate(EvaluateArgs),
    /// Run the protocol for several bin counts on shared splits.
    SweepBins(SweepArgs),
    /// Put the kappa columns of several reports side by side.
    Compare(CompareArgs),
    /// Answer protocol requests on stdin/stdout with a saved model.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Write a synthetic Gaussian-mixture dataset as tabular CSV.
    Gen(GenArgs),
    /// Print class counts and dimensions.
    Inspect(InputArgs),
    /// Stratified Z1/Z2/Z3 split, saved as JSON.
    Split(SplitArgs),
}

#[derive(Debug, Subcommand)]
pub enum FeaturesCommand {
    /// Compute raw descriptors for every sample of an image manifest.
    Extract(ExtractArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Tabular,
    ImageManifest,
}

impl From<FormatArg> for DatasetFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Tabular => DatasetFormat::Tabular,
            FormatArg::ImageManifest => DatasetFormat::ImageManifest,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Ova,
    Ovo,
    Probabilistic,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Ova => Strategy::Ova,
            StrategyArg::Ovo => Strategy::Ovo,
            StrategyArg::Probabilistic => Strategy::Probabilistic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Linear,
    Rbf,
}

impl From<KernelArg> for KernelKind {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Linear => KernelKind::Linear,
            KernelArg::Rbf => KernelKind::Rbf,
        }
    }
}

/// `start..end`, zero-based and end-exclusive.
pub fn parse_range(s: &str) -> Result<Range<usize>, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected START..END, got '{s}'"))?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad range start in '{s}'"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad range end in '{s}'"))?;
    if a >= b {
        return Err(format!("empty range '{s}'"));
    }
    Ok(a..b)
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Dataset file.
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "tabular")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_parser = ["lar2", "egg9", "pro7"])]
    pub preset: String,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub ds1_noise: Option<f64>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.4, 0.3, 0.3])]
    pub fractions: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Equalize class counts in Z1.
    #[arg(long)]
    pub balance: bool,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Image manifest (`id,image_path,mask_path,label`).
    pub manifest: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitInput {
    #[command(flatten)]
    pub input: InputArgs,
    /// Split file written by `dataset split`.
    #[arg(long)]
    pub split: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: SplitInput,
    #[arg(long, value_enum, default_value = "probabilistic")]
    pub strategy: StrategyArg,
    #[arg(long, value_enum, default_value = "rbf")]
    pub kernel: KernelArg,
    /// C values to search.
    #[arg(long = "c", value_delimiter = ',')]
    pub c: Option<Vec<f64>>,
    /// Gamma values to search (RBF only).
    #[arg(long, value_delimiter = ',')]
    pub gamma: Option<Vec<f64>>,
    /// Feature columns to use, as START..END.
    #[arg(long, value_parser = parse_range)]
    pub columns: Option<Range<usize>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub data: SplitInput,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Laplace-smoothed cell estimates.
    #[arg(long)]
    pub smoothing: bool,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RouteArgs {
    #[command(flatten)]
    pub data: SplitInput,
    /// DS1 model.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    /// DS2 as a saved model.
    #[arg(long, conflicts_with = "strong_command", required_unless_present = "strong_command")]
    pub strong: Option<PathBuf>,
    /// DS2 as an external protocol server, program followed by its arguments.
    #[arg(long, num_args = 1.., allow_hyphen_values = true)]
    pub strong_command: Option<Vec<String>>,
    /// Per-request timeout for an external DS2, in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub timeout: f64,
    /// Budget as a fraction of Z3.
    #[arg(long, default_value_t = 0.10)]
    pub budget: f64,
    /// Budget as an absolute count; overrides --budget.
    #[arg(long)]
    pub budget_count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Uniform selection instead of the histogram.
    #[arg(long)]
    pub random: bool,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub config: PathBuf,
    /// Report JSON, including the raw per-repetition results.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Text rendering; printed to stdout when absent.
    #[arg(long)]
    pub text: Option<PathBuf>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub config: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [10, 20, 30])]
    pub bins: Vec<usize>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub repetitions: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Report JSON files written by `evaluate`.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Exit after answering this many requests.
    #[arg(long)]
    pub exit_after: Option<usize>,
    /// Artificial per-request delay.
    #[arg(long, default_value_t = 0.0)]
    pub delay_ms: f64,
}
