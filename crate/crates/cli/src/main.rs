//! `hdgmv` command-line entry point.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "hdgmv",
    version,
    about = "High-dimensional GMV portfolio limits, simulation and backtesting"
)]
struct Cli {
    /// Worker threads for simulations and backtests [default: all cores]
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate the closed-form limits over a (c, l_b) grid as CSV
    Limits(LimitsArgs),
    /// Simulate a returns panel and write it with its parameters
    GenData(GenDataArgs),
    /// Run the Monte Carlo study over an (n, c, c_tilde) grid
    Simulate(SimulateArgs),
    /// Check the quadratic-form limits by simulation and emit a JSON report
    #[command(name = "verify-lemmas")]
    Verify(VerifyArgs),
    /// Rolling-window backtest of all strategies on a returns CSV
    Backtest(BacktestArgs),
}

#[derive(Debug, Args)]
pub struct LimitsArgs {
    /// JSON config file; flags override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// In-sample concentration ratios p/n, comma separated, each in (0, 1)
    #[arg(long, value_delimiter = ',')]
    pub c: Option<Vec<f64>>,
    /// Target relative losses, comma separated [default: 1]
    #[arg(long, value_delimiter = ',')]
    pub lb: Option<Vec<f64>>,
    /// Output CSV file [default: standard output]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// t5, var1 or ccc_garch
    #[arg(long)]
    pub scenario: Option<String>,
    /// Number of assets
    #[arg(long)]
    pub p: Option<usize>,
    /// Number of time points
    #[arg(long)]
    pub t: Option<usize>,
    /// Master seed (required here or in the config)
    #[arg(long)]
    pub seed: Option<u64>,
    /// First date of the panel; later dates skip weekends [default: 2000-01-03]
    #[arg(long)]
    pub start_date: Option<String>,
    /// Output directory for returns.csv and params.json [default: .]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// t5, var1 or ccc_garch
    #[arg(long)]
    pub scenario: Option<String>,
    /// In-sample sizes, comma separated
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Ratios c = p/n, comma separated
    #[arg(long, value_delimiter = ',')]
    pub c: Option<Vec<f64>>,
    /// Ratios c_tilde = p/m, comma separated
    #[arg(long, value_delimiter = ',')]
    pub c_tilde: Option<Vec<f64>>,
    /// Repetitions per cell [default: 1000]
    #[arg(long)]
    pub reps: Option<usize>,
    /// Master seed (required here or in the config)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tolerance override KEY=VALUE, repeatable; keys ratio_lower [0.9], ratio_upper [1.1], ordering_fraction [0.9]
    #[arg(long = "tolerance", value_name = "KEY=VALUE")]
    pub tolerances: Vec<String>,
    /// Output directory for cells.csv and report.json [default: .]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dimension [default: 400]
    #[arg(long)]
    pub p: Option<usize>,
    /// In-sample size [default: 800]
    #[arg(long)]
    pub n: Option<usize>,
    /// Out-of-sample size [default: 800]
    #[arg(long)]
    pub m: Option<usize>,
    /// Repetitions [default: 500]
    #[arg(long)]
    pub reps: Option<usize>,
    /// Master seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Allowed relative deviation from the limits [default: 0.05]
    #[arg(long)]
    pub relative_tolerance: Option<f64>,
    /// Allowed relative gap between centered and plain variants [default: 0.02]
    #[arg(long)]
    pub agreement_tolerance: Option<f64>,
    /// Allowed relative gap of the cross term from its 1/sqrt(m) envelope [default: 0.1]
    #[arg(long)]
    pub cross_tolerance: Option<f64>,
    /// Output JSON file [default: standard output]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Returns CSV: header `date,<asset>,...`, one row per date
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Estimation window length [default: 200]
    #[arg(long)]
    pub n: Option<usize>,
    /// Evaluation window length [default: 200]
    #[arg(long)]
    pub m: Option<usize>,
    /// Roll step in observations [default: 1]
    #[arg(long)]
    pub step: Option<usize>,
    /// Size of a random asset subset [default: all assets]
    #[arg(long)]
    pub assets: Option<usize>,
    /// Seed of the asset subset draw (required with --assets)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Explicit asset subset, comma separated
    #[arg(long, value_delimiter = ',')]
    pub asset_ids: Option<Vec<String>>,
    /// Output directory for backtest.csv and summary.json [default: .]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = cli.threads;
    hdgmv::parallel::with_threads(threads, move || match cli.command {
        Command::Limits(a) => commands::limits(a),
        Command::GenData(a) => commands::gen_data(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Verify(a) => commands::verify(a),
        Command::Backtest(a) => commands::backtest(a),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
