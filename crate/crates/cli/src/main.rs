use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

#[derive(Debug, Parser)]
#[command(
    name = "seqcover",
    version,
    about = "Combinatorial sequence testing toolkit"
)]
pub struct Cli {
    /// Test model JSON; the bundled alternating-bit model when omitted.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Criterion spec JSON; Kuhn-Higdon with t=2 when omitted.
    #[arg(long, global = true)]
    pub criteria: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a pool of distinct valid tests by random walks.
    Pool {
        #[arg(long, default_value_t = 50_000)]
        walks: usize,
        #[arg(long, default_value_t = 50)]
        max_len: usize,
    },
    /// Pick a suite of tests from a pool.
    Generate(GenerateArgs),
    /// Coverage report of a suite.
    Cover {
        /// Suite file (pool format).
        #[arg(long)]
        suite: PathBuf,
        /// Length cap for emptiness checks on cyclic models.
        #[arg(long)]
        len_cap: Option<usize>,
    },
    /// Replay or simulate an execution history and track per-index risk.
    Bayes(BayesArgs),
    /// Catch-probability and rank-comparison grids.
    Experiment(ExperimentArgs),
    /// Tic-tac-toe game and symmetry-class counts.
    TttCount {
        #[arg(long, default_value_t = 3)]
        board: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ga,
    Random,
    BestOfK,
}

#[derive(Debug, Args)]
pub struct GaArgs {
    #[arg(long)]
    pub population_size: Option<usize>,
    #[arg(long)]
    pub mutation_prob: Option<f64>,
    #[arg(long)]
    pub crossover_prob: Option<f64>,
    #[arg(long)]
    pub tournament_k: Option<usize>,
    #[arg(long)]
    pub max_generations: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub elitism: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Ga)]
    pub method: MethodArg,
    /// Suite size.
    #[arg(short = 'n', long = "size", default_value_t = 10)]
    pub n: usize,
    /// Candidates drawn by best-of-k.
    #[arg(short, long, default_value_t = 1000)]
    pub k: usize,
    /// Evolution log CSV (GA only).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub ga: GaArgs,
}

#[derive(Debug, Args)]
pub struct BayesArgs {
    /// History CSV to replay; a history is simulated when omitted.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Simulated tests.
    #[arg(long, default_value_t = 50_000)]
    pub tests: usize,
    #[arg(long, default_value_t = 50)]
    pub max_len: usize,
    /// Bug spec JSON armed in the simulated system; the four reference bugs when omitted.
    #[arg(long = "bug")]
    pub bugs: Vec<PathBuf>,
    /// Run the simulation against a correct system.
    #[arg(long, conflicts_with = "bugs")]
    pub no_bugs: bool,
    /// Only indices hit at least this often are tracked.
    #[arg(long, default_value_t = 1000)]
    pub min_coverage: u64,
    /// Count bugs rather than passes in alpha.
    #[arg(long)]
    pub alpha_counts_bugs: bool,
    /// Final posterior per index as JSON.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    /// Where to save a simulated history.
    #[arg(long)]
    pub save_history: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    Catch,
    Rank,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub kind: ExperimentKind,
    /// Pool file; a pool is generated from the model when omitted.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long, default_value_t = 50_000)]
    pub walks: usize,
    #[arg(long, default_value_t = 50)]
    pub max_len: usize,
    /// Repetitions per catch cell, or runs per rank cell.
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// Suite sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub sizes: Vec<usize>,
    /// Candidates for the best-of-k method in the rank grid.
    #[arg(short, long, default_value_t = 1000)]
    pub k: usize,
    /// Bug spec JSON; the four reference bugs when omitted.
    #[arg(long = "bug")]
    pub bugs: Vec<PathBuf>,
    /// Exit with status 1 unless the expected orderings hold.
    #[arg(long)]
    pub check: bool,
    #[command(flatten)]
    pub ga: GaArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("SEQCOVER_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("SEQCOVER_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}
