use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "srcr",
    version,
    about = "Joint pruning and quantization toolkit with compression-aware retention metrics",
    args_override_self = true
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct GlobalArgs {
    /// Output format for results on stdout.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Md)]
    pub format: OutputFormat,
    /// Flat `key = value` file whose keys match long flag names.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Write results to this file (atomically) instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Write the run manifest here instead of stderr.
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Md,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Theoretical compression rate of one configuration, or the full grid.
    Tcr(TcrArgs),
    /// Prune a weight matrix.
    Prune(PruneArgs),
    /// Quantize a weight matrix.
    Quantize(QuantizeArgs),
    /// Prune, then quantize with GPTQ in full (a) or masked (b) mode.
    Joint(JointArgs),
    /// Run the synthetic error experiments.
    ValidateErrors(ValidateArgs),
    /// Per-task retention and Sr for benchmark scores.
    Retention(ScoresArgs),
    /// SrCr for one configuration, directly or from benchmark scores.
    Srcr(SrcrArgs),
    /// Rank joint configurations by SrCr.
    Search(SearchArgs),
    /// Retention tables and plot data.
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Tcr(_) => "tcr",
            Command::Prune(_) => "prune",
            Command::Quantize(_) => "quantize",
            Command::Joint(_) => "joint",
            Command::ValidateErrors(_) => "validate-errors",
            Command::Retention(_) => "retention",
            Command::Srcr(_) => "srcr",
            Command::Search(_) => "search",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TcrArgs {
    /// Sparsity as `1/3`, `0.25` or `33.333%`.
    #[arg(long)]
    pub sparsity: Option<String>,
    #[arg(long)]
    pub bits: Option<String>,
    /// `unstructured` or `N:M` (N pruned of every M).
    #[arg(long)]
    pub pattern: Option<String>,
    /// Print the full grid for 16/8/4/3/2 bits and sparsity 0, 1/4, 1/3, 1/2.
    #[arg(long, conflicts_with_all = ["sparsity", "bits", "pattern"])]
    pub table: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 128)]
    pub block_size: usize,
    /// Hessian dampening as a fraction of the mean diagonal.
    #[arg(long, default_value_t = 0.01)]
    pub dampening: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PruneMethod {
    Sparsegpt,
    Magnitude,
}

#[derive(Debug, Args, Serialize)]
pub struct PruneArgs {
    /// Weight matrix (out × in), `.csv` or SRCRMAT1.
    #[arg(long)]
    pub weights: PathBuf,
    /// Calibration inputs (in × samples).
    #[arg(long)]
    pub calib: Option<PathBuf>,
    #[arg(long)]
    pub sparsity: Option<String>,
    #[arg(long)]
    pub pattern: Option<String>,
    #[arg(long, value_enum, default_value_t = PruneMethod::Sparsegpt)]
    pub method: PruneMethod,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Pruned weights.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep mask as a 0/1 matrix.
    #[arg(long)]
    pub mask_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Rtn,
    Nf4,
    Int8,
    Gptq,
}

#[derive(Debug, Args, Serialize)]
pub struct QuantArgs {
    #[arg(long, default_value_t = 4)]
    pub bits: u32,
    #[arg(long, default_value_t = 128)]
    pub group_size: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct QuantizeArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// Calibration inputs; required for gptq, optional otherwise.
    #[arg(long)]
    pub calib: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Scheme::Gptq)]
    pub scheme: Scheme,
    #[command(flatten)]
    pub quant: QuantArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// NF4 absmax block length along a row.
    #[arg(long, default_value_t = 64)]
    pub nf4_block: usize,
    /// int8 columns holding any |w| above this pass through unquantized.
    #[arg(long, default_value_t = 6.0)]
    pub outlier_threshold: f64,
    /// Dequantized weights; a JSON sidecar is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseMode {
    /// Quantize every weight; updates may move pruned positions.
    A,
    /// Keep pruned positions at zero; masked Hessian.
    B,
}

#[derive(Debug, Args, Serialize)]
pub struct JointArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub calib: PathBuf,
    #[arg(long)]
    pub sparsity: Option<String>,
    #[arg(long)]
    pub pattern: Option<String>,
    #[command(flatten)]
    pub quant: QuantArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = CaseMode::B)]
    pub mode: CaseMode,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    /// First seed.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Pairwise calibration correlation in [0, 1).
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 64)]
    pub out_dim: usize,
    #[arg(long, default_value_t = 64)]
    pub in_dim: usize,
    #[arg(long, default_value_t = 1024)]
    pub samples: usize,
    /// Gaussian weight standard deviation.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Comma-separated `sparsity:bits` pairs.
    #[arg(long, default_value = "1/4:4,1/2:8")]
    pub levels: String,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoresArgs {
    /// Score file or directory; defaults to the bundled tables (or $SRCR_FIXTURES).
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Model id, e.g. `llama` or `llama@nf4`; all models when omitted.
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct SrcrArgs {
    #[command(flatten)]
    pub scores: ScoresArgs,
    #[arg(long)]
    pub sparsity: Option<String>,
    #[arg(long)]
    pub bits: Option<String>,
    #[arg(long)]
    pub pattern: Option<String>,
    /// Semantic retention to score directly, skipping score files.
    #[arg(long)]
    pub sr: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SrKindArg {
    /// Ratio of summed task scores.
    Sum,
    /// Retention of the published mean column.
    Mean,
    /// Mean of per-task ratios.
    Ratio,
}

#[derive(Debug, Args, Serialize)]
pub struct SearchArgs {
    #[command(flatten)]
    pub scores: ScoresArgs,
    #[arg(long, value_enum, default_value_t = SrKindArg::Sum)]
    pub sr_kind: SrKindArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FigureArg {
    Retention,
    Srcr,
    JointVsQuant,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    #[command(flatten)]
    pub scores: ScoresArgs,
    /// Emit plot data for a figure instead of the table.
    #[arg(long, value_enum)]
    pub figure: Option<FigureArg>,
    /// Also write `<figure>.csv` and `<figure>.svg` here.
    #[arg(long, requires = "figure")]
    pub plot_dir: Option<PathBuf>,
}
