use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use slim_core::fixtures::FixtureDist;
use slim_core::pipeline::{AdapterMethod, QuantMethod, ScoreMethod};
use slim_core::SparsityPattern;

#[derive(Debug, Parser)]
#[command(
    name = "slim",
    version,
    about = "One-shot quantization, sparsity and low-rank error compensation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compress every 2-D tensor of a weight container.
    Compress(CompressArgs),
    /// Compare a compressed artifact with its original weight.
    Eval(EvalArgs),
    /// Analytic memory and FLOP reduction for a model architecture.
    Budget(BudgetArgs),
    /// Compare the scale search with an exhaustive grid.
    OracleAlpha(OracleArgs),
    /// Per-channel activation statistics from input batches.
    Calib(CalibArgs),
    /// Write a seeded synthetic tensor.
    GenFixture(FixtureArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum QuantArg {
    Absmax,
    GroupAbsmax,
    Slim,
    SlimO,
    None,
}

impl From<QuantArg> for QuantMethod {
    fn from(q: QuantArg) -> Self {
        match q {
            QuantArg::Absmax => Self::Absmax,
            QuantArg::GroupAbsmax => Self::GroupAbsmax,
            QuantArg::Slim => Self::SlimQuant,
            QuantArg::SlimO => Self::SlimQuantO,
            QuantArg::None => Self::None,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScoresArg {
    Wanda,
    Magnitude,
}

impl From<ScoresArg> for ScoreMethod {
    fn from(s: ScoresArg) -> Self {
        match s {
            ScoresArg::Wanda => Self::Wanda,
            ScoresArg::Magnitude => Self::Magnitude,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LoraArg {
    None,
    Naive,
    Slim,
}

impl From<LoraArg> for AdapterMethod {
    fn from(l: LoraArg) -> Self {
        match l {
            LoraArg::None => Self::None,
            LoraArg::Naive => Self::Naive,
            LoraArg::Slim => Self::Slim,
        }
    }
}

/// `none`, `unstructured:RATIO` or `N:M`.
#[derive(Debug, Clone, Copy)]
pub struct SparsityArg(pub Option<SparsityPattern>);

impl FromStr for SparsityArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "none" {
            return Ok(Self(None));
        }
        s.parse::<SparsityPattern>()
            .map(|p| Self(Some(p)))
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    /// Container of f32 weight matrices (`d_in x d_out`).
    #[arg(long)]
    pub weights: PathBuf,
    /// Calibration statistics written by `slim calib`.
    #[arg(long)]
    pub calib: Option<PathBuf>,
    /// Output directory; one `<tensor>.slim` file per weight.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "slim")]
    pub quant: QuantArg,
    #[arg(long, default_value_t = 4)]
    pub wbits: u32,
    /// Group length for group-absmax and quantized adapters.
    #[arg(long, default_value_t = 128)]
    pub group_size: usize,
    #[arg(long, default_value = "2:4")]
    pub sparsity: SparsityArg,
    #[arg(long, value_enum, default_value = "wanda")]
    pub scores: ScoresArg,
    #[arg(long, value_enum, default_value = "slim")]
    pub lora: LoraArg,
    /// Adapter rank as a fraction of the smaller weight dimension [default: 0.1].
    #[arg(long)]
    pub rank_ratio: Option<f32>,
    #[arg(long)]
    pub quantize_lora: bool,
    #[arg(long, default_value_t = 4)]
    pub lora_bits: u32,
    /// Snap layer inputs to FP8 at inference.
    #[arg(long)]
    pub input_fp8: bool,
    /// JSON error report, one entry per tensor.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Evaluation inputs for the report's output errors (identity when absent).
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Weight container holding the original tensor.
    #[arg(long)]
    pub original: PathBuf,
    /// Artifact written by `slim compress`.
    #[arg(long)]
    pub compressed: PathBuf,
    /// Container with one f32 input matrix (`tokens x d_in`).
    #[arg(long)]
    pub inputs: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Tensor name in the original container; defaults to the artifact's
    /// recorded name, or the only tensor present.
    #[arg(long)]
    pub tensor: Option<String>,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Architecture JSON file or preset name.
    #[arg(long)]
    pub arch: String,
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    #[arg(long, default_value_t = 4)]
    pub wbits: u32,
    #[arg(long, default_value_t = 0.0)]
    pub rank_ratio: f64,
    #[arg(long, default_value_t = 16)]
    pub adapter_bits: u32,
    #[arg(long, default_value_t = 16)]
    pub dense_bits: u32,
    /// Sparsity index metadata per weight, in bits.
    #[arg(long, default_value_t = 0.0)]
    pub metadata_bits: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub wbits: u32,
    #[arg(long, default_value_t = 5000, value_parser = clap::value_parser!(u64).range(100..))]
    pub grid_points: u64,
    /// Histogram bins (default scales with the element count).
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CalibArgs {
    /// Container of f32 input batches (`tokens x d_in`), read in name order.
    #[arg(long)]
    pub inputs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// `RxC`
#[derive(Debug, Clone, Copy)]
pub struct Shape(pub usize, pub usize);

impl FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (r, c) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected RxC, got '{s}'"))?;
        let r: usize = r
            .trim()
            .parse()
            .map_err(|_| format!("bad row count in '{s}'"))?;
        let c: usize = c
            .trim()
            .parse()
            .map_err(|_| format!("bad column count in '{s}'"))?;
        if r == 0 || c == 0 {
            return Err(format!("shape must be positive, got '{s}'"));
        }
        Ok(Self(r, c))
    }
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long)]
    pub dist: FixtureDist,
    #[arg(long)]
    pub shape: Shape,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Distribution scale (standard deviation, Laplace `b`, or point magnitude).
    #[arg(long, default_value_t = 1.0)]
    pub scale: f32,
    #[arg(long, default_value = "weight")]
    pub name: String,
}
