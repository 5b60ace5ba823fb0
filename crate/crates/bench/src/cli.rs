//! Command-line interface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "bdl-bench", version, about = "Benchmarks for batch-dynamic k-d trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic dataset to a point file
    Gen(GenArgs),
    /// Time construction over the whole dataset
    Build(RunArgs),
    /// Time inserting the dataset in batches into an empty structure
    Insert(UpdateArgs),
    /// Time deleting batches from a structure holding the whole dataset
    Delete(UpdateArgs),
    /// Time k-NN queries against a structure holding the whole dataset
    Knn(QueryArgs),
    /// Interleaved insertions, deletions and k-NN queries
    Mixed(QueryArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DatasetArg {
    Uniform,
    Visualvar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Binary,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ImplArg {
    Bdl,
    B1,
    B2,
}

impl ImplArg {
    pub fn name(self) -> &'static str {
        match self {
            ImplArg::Bdl => "bdl",
            ImplArg::B1 => "b1",
            ImplArg::B2 => "b2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Object,
    Spatial,
}

#[derive(Args, Clone, Debug)]
pub struct DataArgs {
    /// Synthetic generator (ignored with --input)
    #[arg(long, value_enum, default_value_t = DatasetArg::Uniform)]
    pub dataset: DatasetArg,

    /// Number of generated points
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,

    /// Dimension of generated points
    #[arg(short, long, default_value_t = 3)]
    pub d: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Read points from this file instead of generating them
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Point file format (default: from the file extension)
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,

    /// Random-walk jump probability [default: 0.01]
    #[arg(long)]
    pub p_jump: Option<f64>,

    /// Random-walk step [default: domain / 1000]
    #[arg(long)]
    pub step: Option<f64>,

    /// Random-walk domain side [default: sqrt(n)]
    #[arg(long)]
    pub domain: Option<f64>,
}

#[derive(Args, Clone, Debug)]
pub struct GenArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Output file
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Implementations to run
    #[arg(long = "impl", value_enum, value_delimiter = ',', default_value = "bdl,b1,b2")]
    pub impls: Vec<ImplArg>,

    #[arg(long, value_enum, default_value_t = SplitArg::Object)]
    pub split: SplitArg,

    /// Worker threads (0: all available)
    #[arg(long, default_value_t = 0)]
    pub threads: usize,

    #[arg(long, default_value_t = 3)]
    pub runs: usize,

    #[arg(long, default_value_t = 1)]
    pub warmup: usize,

    /// CSV output file (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Check answers against brute force (only when n <= --validate-cap)
    #[arg(long)]
    pub validate: bool,

    #[arg(long, default_value_t = 50_000)]
    pub validate_cap: usize,

    /// Buffer tree capacity of the dynamic tree
    #[arg(long, default_value_t = bdl_core::DEFAULT_BUFFER_SIZE)]
    pub buffer_size: usize,

    /// Skip the per-slot bloom filters on deletion
    #[arg(long)]
    pub no_bloom: bool,

    /// Neighbours per query; `knn` runs one row per value
    #[arg(long, value_delimiter = ',', default_value = "5")]
    pub k: Vec<usize>,

    /// Dataset points queried for the checksum column
    #[arg(long, default_value_t = 100)]
    pub probes: usize,
}

#[derive(Args, Clone, Debug)]
pub struct UpdateArgs {
    #[command(flatten)]
    pub run: RunArgs,

    /// Batch sizes as percentages of n; one row per value
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub batch_pct: Vec<f64>,

    /// Absolute batch sizes; overrides --batch-pct
    #[arg(long, value_delimiter = ',')]
    pub batch_size: Vec<usize>,

    /// Stop after this many batches
    #[arg(long)]
    pub max_batches: Option<usize>,
}

#[derive(Args, Clone, Debug)]
pub struct QueryArgs {
    #[command(flatten)]
    pub run: RunArgs,

    /// Percentage of the dataset used as queries
    #[arg(long, default_value_t = 10.0)]
    pub query_pct: f64,
}
