use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lrg_core::experiment::{ScaleRange, SplitMode, Variant};
use lrg_core::nn::EncoderKind;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "lrg",
    version,
    about = "Laplacian renormalization of graphs and multi-scale encoder experiments",
    args_override_self = true
)]
pub struct Cli {
    /// Worker threads for seeds and dense kernels (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Master seed; training seeds, the split and scale sampling derive from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// TOML file with default arguments; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a stochastic-block-model dataset.
    GenerateSbm(GenerateSbmArgs),
    /// Entropy and heat-capacity scan; prints the characteristic scale.
    Analyze(AnalyzeArgs),
    /// Coarse-grain and rewire a dataset at one scale.
    Renormalize(RenormalizeArgs),
    /// Train a model variant over several seeds.
    Train(TrainArgs),
    /// Paired Wilcoxon comparison of two training runs.
    Compare(CompareArgs),
    /// Compare the characteristic scale against random scales.
    RandomControl(RandomControlArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenerateSbm(_) => "generate-sbm",
            Command::Analyze(_) => "analyze",
            Command::Renormalize(_) => "renormalize",
            Command::Train(_) => "train",
            Command::Compare(_) => "compare",
            Command::RandomControl(_) => "random-control",
        }
    }
}

pub const SUBCOMMANDS: [&str; 6] = [
    "generate-sbm",
    "analyze",
    "renormalize",
    "train",
    "compare",
    "random-control",
];

#[derive(Debug, Args, Serialize)]
pub struct GenerateSbmArgs {
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Block sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [30, 30])]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.02)]
    pub p_out: f64,
    /// Feature dimension (uniform random features).
    #[arg(long, default_value_t = 8)]
    pub features: usize,
    /// Also write a stratified 60/20/20 masks.csv.
    #[arg(long)]
    pub masks: bool,
}

#[derive(Debug, Args, Serialize, Clone, Copy)]
pub struct ScanArgs {
    #[arg(long, default_value_t = 1e-2)]
    pub tau_min: f64,
    #[arg(long, default_value_t = 1e3)]
    pub tau_max: f64,
    #[arg(long, default_value_t = 300)]
    pub points: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    /// Dataset directory (relative paths also resolve under $LRG_DATA_DIR).
    #[arg(long, visible_alias = "dataset")]
    pub graph: PathBuf,
    #[command(flatten)]
    pub scan: ScanArgs,
    #[arg(long, default_value = "runs/analyze")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RenormalizeArgs {
    #[arg(long, visible_alias = "dataset")]
    pub graph: PathBuf,
    /// Diffusion time; must be positive.
    #[arg(long, required_unless_present = "auto", conflicts_with = "auto")]
    pub tau: Option<f64>,
    /// Use the detected characteristic scale.
    #[arg(long)]
    pub auto: bool,
    #[command(flatten)]
    pub scan: ScanArgs,
    #[arg(long, default_value = "runs/renormalize")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct ModelArgs {
    #[arg(long, default_value = "gcn", value_parser = parse_encoder)]
    pub encoder: EncoderKind,
    /// Number of training seeds.
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 64)]
    pub out_dim: usize,
    #[arg(long, default_value_t = 1)]
    pub heads: usize,
    /// auto (masks.csv if present), provided or stratified.
    #[arg(long, default_value = "auto", value_parser = parse_split)]
    pub split: SplitMode,
    #[command(flatten)]
    pub scan: ScanArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, visible_alias = "graph")]
    pub dataset: PathBuf,
    #[arg(long, default_value = "SB", value_parser = parse_variant)]
    pub variant: Variant,
    /// Encoder count (default 1 for S*, 2 for M*).
    #[arg(long)]
    pub n_encoders: Option<usize>,
    /// Scales of the renormalized slots, comma separated (default: detected).
    #[arg(long, value_delimiter = ',')]
    pub taus: Vec<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output directory (default runs/<encoder>_<variant>).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    /// Run directory (or scores.csv) of the first model.
    #[arg(long)]
    pub a: PathBuf,
    /// Run directory (or scores.csv) of the second model.
    #[arg(long)]
    pub b: PathBuf,
    /// greater: a beats b; less: b beats a.
    #[arg(long, default_value = "greater", value_parser = parse_alternative)]
    pub alt: lrg_core::experiment::Alternative,
    #[arg(long, default_value = "runs/compare")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RandomControlArgs {
    #[arg(long, visible_alias = "graph")]
    pub dataset: PathBuf,
    /// Sampling ranges as lo,hi (default: 0,1 0,10 0,100).
    #[arg(long, num_args = 1.., value_parser = parse_range)]
    pub range: Vec<ScaleRange>,
    /// Random scales per range.
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    /// Reference scale (default: detected).
    #[arg(long)]
    pub tau: Option<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "runs/random-control")]
    pub out: PathBuf,
}

fn parse_encoder(s: &str) -> Result<EncoderKind, String> {
    s.parse()
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse()
}

fn parse_split(s: &str) -> Result<SplitMode, String> {
    match s {
        "auto" => Ok(SplitMode::Auto),
        "provided" => Ok(SplitMode::Provided),
        "stratified" => Ok(SplitMode::Stratified),
        other => Err(format!("unknown split '{other}' (expected auto, provided or stratified)")),
    }
}

fn parse_alternative(s: &str) -> Result<lrg_core::experiment::Alternative, String> {
    s.parse()
}

fn parse_range(s: &str) -> Result<ScaleRange, String> {
    s.parse()
}
