use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sada_core::cluster::Variant;

#[derive(Parser, Debug)]
#[command(
    name = "sada",
    version,
    about = "Situation-aware driving-style adaptation on frozen scene embeddings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset with a ground-truth sidecar
    Synth(SynthArgs),
    /// Tag a dataset with segment-level train/validation splits
    Split(SplitCmd),
    /// Fit the standardizer and k-means on the pretrain training rows
    Cluster(ClusterArgs),
    /// Build one lookup table per driver
    FitDsds(FitDsdsArgs),
    /// Train one MLP (or linear) head per driver
    TrainMlp(TrainMlpArgs),
    /// Pretrain-then-adapt evaluation over seeds
    Eval(EvalArgs),
    /// Cluster specificity over a list of cluster counts
    Ecs(SweepArgs),
    /// Validation RMSE over a list of cluster counts
    Sweep(SweepArgs),
    /// Streaming adaptation in temporal chunks
    Iterate(IterateArgs),
    /// Collect the reports in an output directory into one markdown file
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VariantArg {
    Km,
    Kms,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Km => Variant::Classical,
            VariantArg::Kms => Variant::Spherical,
        }
    }
}

#[derive(Args, Debug)]
pub struct OutArgs {
    /// Directory receiving every output file
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; 1 runs everything sequentially
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: u64,
}

#[derive(Args, Debug)]
pub struct SeedArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated seed list; overrides --seed
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Rows per segment
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
    pub segment_len: u64,
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
}

/// Pretrain and driver datasets. Embeddings are read from the table path
/// with an `.emb` extension. Without either path a default synthetic world
/// is generated.
#[derive(Args, Debug)]
pub struct DataArgs {
    #[arg(long)]
    pub pretrain: Option<PathBuf>,
    #[arg(long)]
    pub driver_data: Option<PathBuf>,
    /// Seed of the default synthetic world
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Args, Debug)]
pub struct MlpArgs {
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch_size: u64,
    #[arg(long, default_value_t = 1e-3)]
    pub lr_max: f64,
    #[arg(long, default_value_t = 0.01)]
    pub weight_decay: f64,
    /// Output range of the heads, meters
    #[arg(long, default_value_t = 1.0)]
    pub d_max: f64,
    /// Comma-separated hidden widths of the mlp predictor
    #[arg(long, value_delimiter = ',', default_value = "64,64")]
    pub hidden: Vec<usize>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Number of latent situations
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Embedding dimension
    #[arg(long, default_value_t = 16)]
    pub d: usize,
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.05)]
    pub sigma_emb: f64,
    #[arg(long, default_value_t = 0.05)]
    pub sigma_beh: f64,
    #[arg(long, default_value_t = 1.0)]
    pub purity: f64,
    #[arg(long, default_value_t = 1)]
    pub drivers: usize,
    #[arg(long, default_value_t = 0.0)]
    pub driver_offset_std: f64,
    #[arg(long)]
    pub regime_flip: bool,
    /// Also write a driver dataset of this many rows from the same world
    #[arg(long, default_value_t = 0)]
    pub driver_n: usize,
    #[arg(long, default_value_t = 5)]
    pub driver_drivers: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct SplitCmd {
    /// Dataset table
    pub input: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    #[arg(long)]
    pub pretrain: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_c: u64,
    #[arg(long, value_enum, default_value_t = VariantArg::Km)]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub split: SplitArgs,
    /// k-means seedings per fit; the lowest inertia wins
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_init: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct FitDsdsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_c: u64,
    #[arg(long, value_enum, default_value_t = VariantArg::Km)]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// k-means seedings per fit; the lowest inertia wins
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_init: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct TrainMlpArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// mlp or linear
    #[arg(long, default_value = "mlp")]
    pub predictor: String,
    #[command(flatten)]
    pub mlp: MlpArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// dsds-km, dsds-kms, mlp, linear, static, static-passive or static-sportive
    #[arg(long, default_value = "dsds-km")]
    pub predictor: String,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_c: u64,
    #[command(flatten)]
    pub seeds: SeedArgs,
    #[command(flatten)]
    pub mlp: MlpArgs,
    /// road_type code of the rural subset
    #[arg(long, default_value_t = 1.0)]
    pub rural_code: f64,
    /// k-means seedings per fit; the lowest inertia wins
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_init: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated cluster counts
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "1,5,10,20,50",
        value_parser = clap::value_parser!(u64).range(1..)
    )]
    pub n_c: Vec<u64>,
    #[arg(long, value_enum, default_value_t = VariantArg::Km)]
    pub variant: VariantArg,
    #[command(flatten)]
    pub seeds: SeedArgs,
    #[arg(long, default_value_t = 1.0)]
    pub rural_code: f64,
    /// k-means seedings per fit; the lowest inertia wins
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_init: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct IterateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "dsds-km")]
    pub predictor: String,
    /// Chunk size as a fraction of each driver's training rows
    #[arg(long, default_value_t = 0.1)]
    pub fraction: f64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_c: u64,
    #[command(flatten)]
    pub seeds: SeedArgs,
    #[command(flatten)]
    pub mlp: MlpArgs,
    /// k-means seedings per fit; the lowest inertia wins
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_init: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Directory holding the reports; report.md is written here
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}
