//! `bdr`: quantize tensor files, estimate QSNR, evaluate the analytic bound,
//! simulate dot products, sweep the design space and extract the Pareto
//! frontier.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (including a failed
//! `verify`).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bdr", version, about = "Block data representation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cast a tensor file into a format and write the dequantized tensor.
    Quantize(QuantizeArgs),
    /// Estimate mean QSNR of one or more formats on synthetic vectors.
    Qsnr(QsnrArgs),
    /// Evaluate the closed-form QSNR lower bound.
    Bound(BoundArgs),
    /// Run the bit-accurate dot-product engine against the exact reference.
    Dot(DotArgs),
    /// Sweep the block-format design space into a cost CSV.
    Sweep(SweepArgs),
    /// Extract the Pareto frontier from a cost CSV.
    Pareto(ParetoArgs),
    /// Check that no measured QSNR falls below the bound.
    Verify(VerifyArgs),
}

#[derive(Args)]
pub struct QuantizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub preset: String,
    /// Blocking axis; negative values count from the end.
    #[arg(long, default_value_t = -1, allow_hyphen_values = true)]
    pub axis: i64,
    /// Also write the JSON report here (it always goes to stdout).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args)]
pub struct QsnrArgs {
    /// Format to evaluate; repeat for several.
    #[arg(long = "preset", required = true)]
    pub presets: Vec<String>,
    /// Distribution as `name[:p1,p2,...]`.
    #[arg(long, default_value = "gaussian-variable-variance")]
    pub dist: String,
    #[arg(long, default_value_t = 10_000)]
    pub n_vectors: usize,
    #[arg(long = "len", default_value_t = 1024)]
    pub vec_len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Average pooled noise and signal energy instead of per-vector dB.
    #[arg(long)]
    pub pooled: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BoundArgs {
    #[arg(long, conflicts_with_all = ["m", "k1", "k2", "d2"])]
    pub preset: Option<String>,
    #[arg(long, required_unless_present = "preset")]
    pub m: Option<u32>,
    #[arg(long, required_unless_present = "preset")]
    pub k1: Option<usize>,
    /// Defaults to `k1` (a single sub-block).
    #[arg(long)]
    pub k2: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub d2: u32,
    /// Vector length.
    #[arg(long)]
    pub n: usize,
}

#[derive(Args)]
pub struct DotArgs {
    #[arg(long)]
    pub preset: String,
    /// Tensor file holding the first operand; sampled when absent.
    #[arg(long, requires = "b")]
    pub a: Option<PathBuf>,
    #[arg(long, requires = "a")]
    pub b: Option<PathBuf>,
    /// Length of sampled operands.
    #[arg(long = "len", default_value_t = 256)]
    pub vec_len: usize,
    #[arg(long, default_value = "gaussian-variable-variance")]
    pub dist: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Accumulator width; defaults to the format's natural width.
    #[arg(long)]
    pub acc_bits: Option<u32>,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub m: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    pub d2: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    pub k1: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub k2: Option<Vec<usize>>,
    #[arg(long)]
    pub d1: Option<u32>,
    /// Skip the FP8, INT and VSQ reference rows.
    #[arg(long)]
    pub no_baselines: bool,
    #[arg(long, default_value = "gaussian-variable-variance")]
    pub dist: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub n_vectors: Option<usize>,
    #[arg(long = "len")]
    pub vec_len: Option<usize>,
    /// Reduction length for the area model.
    #[arg(long)]
    pub r: Option<usize>,
    /// Print the plan and exit.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Args)]
pub struct ParetoArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Synthesized areas (`format,r,area_units`) replacing the proxy where
    /// available.
    #[arg(long)]
    pub area_table: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    pub r: usize,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 100)]
    pub configs: usize,
    #[arg(long, default_value_t = 100)]
    pub n_vectors: usize,
    #[arg(long = "len", default_value_t = 1024)]
    pub vec_len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub enum Failure {
    Usage(String),
    Data(String),
}

impl From<bdr::Error> for Failure {
    fn from(e: bdr::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("BDR_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("BDR_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Quantize(a) => commands::quantize(a),
        Command::Qsnr(a) => commands::qsnr(a),
        Command::Bound(a) => commands::bound(a),
        Command::Dot(a) => commands::dot(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Pareto(a) => commands::pareto(a),
        Command::Verify(a) => commands::verify(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
