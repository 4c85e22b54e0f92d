use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Encrypted message passing benchmarks and latency models.
#[derive(Debug, Parser)]
#[command(name = "secmsg", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a benchmark and write a samples CSV.
    Bench(BenchArgs),
    /// Fit a model to a samples CSV and merge it into a parameter file.
    Fit(FitArgs),
    /// Evaluate models from presets or a parameter file.
    Predict(PredictArgs),
    /// Compare measured samples against model predictions.
    Validate(ValidateArgs),
    /// Generate a samples CSV from a model, with optional noise.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchKind {
    Pingpong,
    Multipair,
    Encdec,
    Collective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Op {
    Alltoall,
    Alltoallv,
    Allgather,
    Bcast,
}

#[derive(Debug, Args)]
pub struct Security {
    /// AES-GCM implementation: ring or rustcrypto.
    #[arg(long, default_value = "ring")]
    pub backend: String,
    /// 128- or 256-bit key in hex. SECMSG_KEY takes precedence.
    #[arg(long)]
    pub key: Option<String>,
    /// Send plaintext instead of sealed frames.
    #[arg(long)]
    pub plain: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(value_enum)]
    pub kind: BenchKind,
    /// Run every rank as a thread of this process over loopback.
    #[arg(long, conflicts_with_all = ["roster", "rank"])]
    pub local: bool,
    /// Roster file with `rank host port` lines.
    #[arg(long, requires = "rank")]
    pub roster: Option<PathBuf>,
    #[arg(long, requires = "roster")]
    pub rank: Option<usize>,
    #[command(flatten)]
    pub security: Security,
    /// Message sizes in bytes.
    #[arg(long, value_delimiter = ',', default_value = "1,1024,65536,1048576")]
    pub sizes: Vec<u64>,
    /// Pair counts (multipair) or worker threads (encdec).
    #[arg(long, alias = "threads", value_delimiter = ',', default_value = "1")]
    pub pairs: Vec<u32>,
    /// Multiplies every iteration count.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Eager/rendezvous cut-over in bytes.
    #[arg(long, default_value_t = 131_072)]
    pub threshold: usize,
    /// Collective to time.
    #[arg(long, value_enum, default_value = "alltoall")]
    pub op: Op,
    /// Group size for local collective runs.
    #[arg(long, default_value_t = 4)]
    pub ranks: usize,
    /// Overrides the per-run iteration count.
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub min_runs: Option<usize>,
    #[arg(long)]
    pub hard_budget: Option<usize>,
    /// Samples CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitModel {
    Hockney,
    Encdec,
    Maxrate,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(value_enum)]
    pub model: FitModel,
    /// Samples CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 131_072)]
    pub threshold: u64,
    /// Parameter file; existing sections for other models are kept.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictMode {
    Single,
    Multipair,
    Pipelined,
    Overhead,
}

#[derive(Debug, Args)]
pub struct ModelSource {
    /// Parameter file.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Communication preset: ethernet, ib, ethernet-multipair, ib-multipair,
    /// optionally suffixed -eager or -rendezvous to pin the phase.
    #[arg(long)]
    pub preset: Option<String>,
    /// Encryption preset: boringssl, libsodium, cryptopp-mpich, cryptopp-mvapich.
    #[arg(long)]
    pub enc: Option<String>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, value_enum, default_value = "single")]
    pub mode: PredictMode,
    #[command(flatten)]
    pub source: ModelSource,
    #[arg(long, value_delimiter = ',', alias = "size", default_value = "1048576")]
    pub sizes: Vec<u64>,
    #[arg(long, value_delimiter = ',')]
    pub pairs: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ValidateModel {
    /// Plain single-pair line, α + β·k·m.
    Hockney,
    /// Communication plus encryption line.
    Enhanced,
    /// Multiple-pair composition.
    Multipair,
    /// Encryption line alone.
    Encdec,
    /// Max-rate encryption model.
    Maxrate,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Measured samples CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, alias = "mode", value_enum, default_value = "hockney")]
    pub model: ValidateModel,
    #[command(flatten)]
    pub source: ModelSource,
    /// Report CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "hockney")]
    pub model: ValidateModel,
    #[command(flatten)]
    pub source: ModelSource,
    #[arg(long, value_delimiter = ',', default_value = "1,1024,65536,131072,1048576,2097152")]
    pub sizes: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub pairs: Vec<u32>,
    /// Samples per (size, k).
    #[arg(long, default_value_t = 20)]
    pub runs: u32,
    /// Relative standard deviation of multiplicative Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
