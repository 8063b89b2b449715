//! Command line front end: file-in, file-out runs of the density,
//! band, counterfactual, test, simulation and summary pipelines.
//!
//! Every command is deterministic given its inputs, resolved options and
//! seed. Outputs are written atomically (temp file, then rename) and every
//! file-producing run leaves a `<out>.meta.json` sidecar recording all
//! resolved options, so a result file always names the configuration that
//! produced it.
//!
//! Options come from flags first, then from an optional `--config` file
//! with one `key = value` per line (`#` comments), then from defaults.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process;

mod commands;
mod config;
mod output;

/// Failure taxonomy behind the exit codes: 1 usage, 2 input, 3 numerical.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, bad config keys, missing required options.
    Usage(String),
    /// Unreadable or invalid data files, degenerate or unusable data.
    Input(String),
    /// A numeric routine failed on otherwise valid input.
    Numerical(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Input(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<dyadic_density::Error> for Failure {
    fn from(e: dyadic_density::Error) -> Self {
        use dyadic_density::Error as E;
        match e {
            E::Input(_) | E::DegenerateInput(_) | E::SupportViolation { .. } => {
                Failure::Input(e.to_string())
            }
            E::KernelConstruction(_) | E::Numerical(_) => Failure::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "dyadic-density",
    version,
    about = "Density estimation and uniform inference for network edge data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the edge density on a grid
    Estimate(EstimateArgs),
    /// Uniform confidence band around the estimated density
    Band(BandArgs),
    /// Observed and counterfactual densities, each with a band
    Counterfactual(CounterfactualArgs),
    /// Test equality of two edge densities
    Test2(Test2Args),
    /// Monte Carlo coverage study on synthetic networks
    Simulate(SimulateArgs),
    /// Node, edge and clustering statistics of the input network
    Summary(SummaryArgs),
}

/// Input-side options shared by the data-consuming commands.
#[derive(Args, Debug)]
pub struct InputArgs {
    /// Edge-list CSV with header i,j,w (or i,j,flow_ij,flow_ji with --trade)
    #[arg(long)]
    input: Vec<PathBuf>,
    /// Treat inputs as directed flow pairs and use log(flow_ij + flow_ji)
    #[arg(long)]
    trade: bool,
}

/// Output-side options shared by every command.
#[derive(Args, Debug)]
pub struct OutArgs {
    /// Output file path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Options file, one `key = value` per line; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Evaluation-grid options.
#[derive(Args, Debug)]
pub struct GridOpts {
    /// Inference domain as two comma-separated endpoints: a,b
    #[arg(long, value_parser = config::parse_domain, allow_hyphen_values = true)]
    domain: Option<(f64, f64)>,
    /// Number of evaluation points
    #[arg(long)]
    grid: Option<usize>,
    /// Kernel family: epanechnikov, triangular or uniform
    #[arg(long)]
    kernel: Option<String>,
}

/// Kernel orders for the bias-robust pipeline.
#[derive(Args, Debug)]
pub struct OrderOpts {
    /// Kernel order used for bandwidth selection
    #[arg(long)]
    p: Option<usize>,
    /// Higher kernel order used for estimation and resampling
    #[arg(long = "p-prime")]
    p_prime: Option<usize>,
}

/// Resampling options.
#[derive(Args, Debug)]
pub struct LevelOpts {
    /// One minus the coverage level
    #[arg(long)]
    alpha: Option<f64>,
    /// Gaussian resampling draws behind the quantile
    #[arg(long = "B")]
    b_draws: Option<usize>,
    /// Seed for all randomized steps
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    grid: GridOpts,
    /// Kernel order
    #[arg(long)]
    p: Option<usize>,
    /// Fixed bandwidth instead of the rule of thumb
    #[arg(long)]
    bandwidth: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
pub struct BandArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    grid: GridOpts,
    #[command(flatten)]
    orders: OrderOpts,
    #[command(flatten)]
    level: LevelOpts,
    /// Fixed bandwidth instead of the rule of thumb
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Add a tiny diagonal ridge before the covariance repair
    #[arg(long)]
    ridge: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
pub struct CounterfactualArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Per-node covariate CSV with header node,x0,x1
    #[arg(long)]
    covariates: Option<PathBuf>,
    #[command(flatten)]
    grid: GridOpts,
    #[command(flatten)]
    orders: OrderOpts,
    #[command(flatten)]
    level: LevelOpts,
    /// Add a tiny diagonal ridge before the covariance repair
    #[arg(long)]
    ridge: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
pub struct Test2Args {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    grid: GridOpts,
    #[command(flatten)]
    orders: OrderOpts,
    #[command(flatten)]
    level: LevelOpts,
    /// Statistic over the difference curve: sup or 2
    #[arg(long)]
    stat: Option<String>,
    /// Add a tiny diagonal ridge before the covariance repair
    #[arg(long)]
    ridge: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Nodes per synthetic network
    #[arg(long)]
    n: Option<usize>,
    /// Replications per mixing vector
    #[arg(long)]
    reps: Option<usize>,
    /// Use the full-scale study design (2000 reps of n=3000; hours of work)
    #[arg(long = "full-scale")]
    full_scale: bool,
    #[command(flatten)]
    grid: GridOpts,
    #[command(flatten)]
    orders: OrderOpts,
    #[command(flatten)]
    level: LevelOpts,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
pub struct SummaryArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output file path; omit to print to stdout
    #[command(flatten)]
    out: OutArgs,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let benign = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            process::exit(if benign { 0 } else { 1 });
        }
    };
    let result = match &cli.command {
        Command::Estimate(a) => commands::estimate(a),
        Command::Band(a) => commands::band(a),
        Command::Counterfactual(a) => commands::counterfactual(a),
        Command::Test2(a) => commands::test2(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Summary(a) => commands::summary(a),
    };
    if let Err(f) = result {
        eprintln!("error: {}", f.message());
        process::exit(f.code());
    }
}
