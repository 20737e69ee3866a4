//! `permrank`: run bandit ranking games, seed sweeps and the verification suite.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "permrank", version, about = "Bandit linear optimization over the permutahedron")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Play one game and write its trace, summary and manifest.
    Run(RunArgs),
    /// Replicate a game over a grid of horizons and fit the regret slope.
    Sweep(SweepArgs),
    /// Check every closed form against exhaustive enumeration.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
pub struct GameArgs {
    /// banditrank, osmdrank or uniform
    #[arg(long)]
    pub algo: String,
    #[arg(long)]
    pub n: usize,
    /// fixed[:v], noisy-fixed[:amplitude], switch[:v] or seasonal[:period]
    #[arg(long, default_value = "noisy-fixed")]
    pub adversary: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Loss regime (dual or l1); defaults to the algorithm's own regime.
    #[arg(long)]
    pub regime: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long = "c-gamma")]
    pub c_gamma: Option<f64>,
    #[arg(long = "c-eta")]
    pub c_eta: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum TraceFormat {
    Csv,
    Json,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub game: GameArgs,
    /// Number of rounds.
    #[arg(long = "t")]
    pub horizon: usize,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = TraceFormat::Csv)]
    pub format: TraceFormat,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Synthetic {
    Sqrt,
    Linear,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub game: GameArgs,
    /// Comma-separated horizons.
    #[arg(long = "t-grid", value_delimiter = ',', required = true)]
    pub t_grid: Vec<usize>,
    /// Replicas per horizon; replica k uses seed (seed XOR k).
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    /// Concurrent replicas.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Replace the games by an exact regret curve, to check the fitting path.
    #[arg(long, value_enum)]
    pub synthetic: Option<Synthetic>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long = "max-n", default_value_t = 5)]
    pub max_n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random instances per n.
    #[arg(long, default_value_t = 6)]
    pub cases: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => commands::run(&args),
        Command::Sweep(args) => commands::sweep(&args),
        Command::Verify(args) => commands::verify(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
