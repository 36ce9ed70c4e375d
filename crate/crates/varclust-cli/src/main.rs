//! Command-line interface: dataset generation, clustering runs, model
//! selection sweeps, evaluation against ground truth and scaled-down
//! benchmark suites.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O error, 3 reached the
//! iteration cap without converging (results are still written), 4
//! numeric failure (the soft algorithm's documented underflow regime,
//! also written with a diagnostic).

mod bench;
mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::process::ExitCode;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_NO_CONVERGENCE: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Parser)]
#[command(
    name = "varclust",
    about = "Cluster vector time series by their autoregressive dynamics",
    version
)]
struct Cli {
    /// Worker threads (default: VARCLUST_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset of stable VAR clusters.
    Generate(GenerateArgs),
    /// Cluster a dataset with cmvar, klmvar or the naive 2-step baseline.
    Cluster(ClusterArgs),
    /// Sweep (K, p) candidates and score them with the extended BIC.
    Select(SelectArgs),
    /// Compare predicted labels against ground truth (RI, NMI).
    Evaluate(EvaluateArgs),
    /// Run a benchmark suite and append rows to a long-format CSV.
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Variable dimension m.
    #[arg(long)]
    pub m: usize,
    /// VAR order p.
    #[arg(long)]
    pub p: usize,
    /// Series length T.
    #[arg(long = "T", visible_alias = "t-len")]
    pub t_len: usize,
    /// Number of clusters K.
    #[arg(long = "K", visible_alias = "k")]
    pub k: usize,
    /// Series per cluster N_c.
    #[arg(long = "Nc", visible_alias = "n-per-cluster")]
    pub n_per_cluster: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub burn_in: usize,
    /// Smallest root magnitude (must exceed 1).
    #[arg(long, default_value_t = 1.1)]
    pub root_min: f64,
    /// Largest root magnitude.
    #[arg(long, default_value_t = 5.0)]
    pub root_max: f64,
    /// Output directory (dataset.csv and truth.json are written there).
    #[arg(short, long)]
    pub out: std::path::PathBuf,
}

#[derive(Args)]
pub struct ClusterArgs {
    /// Dataset CSV, or a directory containing dataset.csv.
    pub data: std::path::PathBuf,
    /// cmvar | klmvar | naive2step.
    #[arg(long)]
    pub algo: Option<String>,
    /// Number of clusters K.
    #[arg(long = "K", visible_alias = "k")]
    pub k: Option<usize>,
    /// Shared VAR order for every cluster.
    #[arg(long)]
    pub p: Option<usize>,
    /// Per-cluster orders, comma separated (overrides --p).
    #[arg(long, value_delimiter = ',')]
    pub orders: Option<Vec<usize>>,
    /// Regression window start; defaults to the largest order.
    #[arg(long)]
    pub p_max: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent restarts; the best objective wins.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Initialization: 2step | random.
    #[arg(long)]
    pub init: Option<String>,
    /// Use raw covariances in the label update (klmvar only).
    #[arg(long)]
    pub unnormalized: bool,
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// Output directory (result.json and labels.csv).
    #[arg(short, long)]
    pub out: std::path::PathBuf,
}

#[derive(Args)]
pub struct SelectArgs {
    /// Dataset CSV, or a directory containing dataset.csv.
    pub data: std::path::PathBuf,
    /// K candidates: `a:i:b` range, comma list, or single value.
    #[arg(long = "K", visible_alias = "k")]
    pub k: String,
    /// p candidates: `a:i:b` range, comma list, or single value.
    #[arg(long)]
    pub p: String,
    /// Extended-BIC weight in [0,1]; 0 is the plain BIC.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// cmvar | klmvar.
    #[arg(long)]
    pub algo: Option<String>,
    /// grid | adhoc.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// Grid CSV path (or a directory; grid.csv is written inside).
    #[arg(short, long)]
    pub out: std::path::PathBuf,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Predicted labels CSV.
    #[arg(long)]
    pub labels: std::path::PathBuf,
    /// Ground truth: truth.json or a labels CSV.
    #[arg(long)]
    pub truth: std::path::PathBuf,
    /// Optional metrics JSON output.
    #[arg(short, long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Args)]
pub struct BenchmarkArgs {
    /// precision | scale-K | scale-T | scale-m | twostep-T.
    pub suite: String,
    /// Shrink factor applied to the full-size grids (1 = no shrinking).
    #[arg(long, default_value_t = 0.25)]
    pub scale: f64,
    /// Independent repetitions per configuration.
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,
    /// Comma list overriding the suite's default algorithms.
    #[arg(long, value_delimiter = ',')]
    pub algos: Option<Vec<String>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Restarts per fit (1 = single run, honest timing).
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    /// Results CSV; rows are appended, the header is written once.
    #[arg(short, long)]
    pub out: std::path::PathBuf,
}

fn init_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("VARCLUST_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_threads(cli.threads);

    let outcome = match cli.command {
        Command::Generate(args) => commands::run_generate(&args),
        Command::Cluster(args) => commands::run_cluster(&args),
        Command::Select(args) => commands::run_select(&args),
        Command::Evaluate(args) => commands::run_evaluate(&args),
        Command::Benchmark(args) => commands::run_benchmark(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(commands::exit_code_for(&err))
        }
    }
}
