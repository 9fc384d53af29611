//! `fluidtree` command-line tool.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "fluidtree", version, about = "Fluid network control by LP and oblique decision trees")]
struct Cli {
    /// Worker threads for solves and training (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a network instance and write it as JSON.
    Network(NetworkArgs),
    /// Solve the fluid control problem from one initial state.
    Solve(SolveArgs),
    /// Sample initial states, solve them and write a labeled dataset.
    Generate(GenerateArgs),
    /// Train one oblique tree per pattern cell and write the policy.
    Train(TrainArgs),
    /// Score a trained policy on a test dataset.
    Evaluate(EvaluateArgs),
    /// Run the closed loop under a trained policy.
    Simulate(SimulateArgs),
    /// Print or write the trees of a trained policy.
    ExportTree(ExportArgs),
    /// Time fluid solves (and policy inference) on random states.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Crisscross,
    Rybko,
    Reentrant,
}

#[derive(Debug, Args, Serialize)]
pub struct NetworkArgs {
    /// Network family.
    #[arg(long, value_enum)]
    pub make: Family,
    /// Number of servers for the reentrant line.
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    /// Load of the busiest server for the reentrant line.
    #[arg(long, default_value_t = 0.8)]
    pub load: f64,
    /// Run seed; the reentrant rates are drawn from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output spec file.
    #[arg(long)]
    pub out: PathBuf,
}

/// Discretization flags shared by the solving subcommands.
#[derive(Debug, Args, Serialize, Clone)]
pub struct GridArgs {
    /// Number of time intervals N.
    #[arg(long, default_value_t = 400)]
    pub intervals: usize,
    /// Horizon T, or `auto` for the emptying-time bound.
    #[arg(long, default_value = "auto")]
    pub horizon: String,
    /// Grid grading exponent; 1 is uniform.
    #[arg(long, default_value_t = 2.0)]
    pub grading: f64,
    /// Re-solve once on a grid refined around control changes.
    #[arg(long)]
    pub refine: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    /// Network spec JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// Initial state, comma separated.
    #[arg(long)]
    pub x0: String,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Also check the maximum-principle conditions with this relative tolerance.
    #[arg(long)]
    pub pontryagin_tol: Option<f64>,
    /// Solution JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional trajectory CSV.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    /// Network spec JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// `all`, `interior`, `random:K` (interior plus K random patterns with at
    /// least half the classes) or a JSON file with a list of 1-based class lists.
    #[arg(long, default_value = "interior")]
    pub patterns: String,
    /// Initial states per pattern.
    #[arg(long = "M", default_value_t = 1000)]
    pub per_pattern: usize,
    /// Scaling factors for augmentation, comma separated (empty for none).
    #[arg(long, default_value = "")]
    pub alphas: String,
    /// Keep only the scaled copies (for test sets).
    #[arg(long)]
    pub scaled_only: bool,
    /// Sampling times as fractions of the horizon, comma separated.
    #[arg(long, default_value = "0")]
    pub times: String,
    /// Skip the grid-doubling ambiguity filter.
    #[arg(long)]
    pub no_filter: bool,
    /// Relative emptiness threshold for support patterns.
    #[arg(long, default_value_t = fluidtree::dataset::EPS_ZERO)]
    pub eps_zero: f64,
    /// Instances per warm-started chunk.
    #[arg(long, default_value_t = 64)]
    pub chunk_size: usize,
    /// Run seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Dataset directory written by `generate`.
    #[arg(long)]
    pub data: PathBuf,
    /// Maximum depth, or `auto` to pick from the depth grid on a validation split.
    #[arg(long, default_value = "auto")]
    pub max_depth: String,
    /// Depths tried by `--max-depth auto`, comma separated.
    #[arg(long, default_value = "3,5,10")]
    pub depth_grid: String,
    /// Validation fraction for `--max-depth auto`.
    #[arg(long, default_value_t = 0.2)]
    pub valid_fraction: f64,
    /// Fraction of coefficients allowed per split (omit for dense splits).
    #[arg(long)]
    pub sparsity: Option<f64>,
    /// Minimum samples per leaf.
    #[arg(long, default_value_t = 5)]
    pub min_leaf: usize,
    /// Local-search restarts per node.
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    /// `per-pattern`, `single`, or a JSON file with a list of cells, each a list of patterns.
    #[arg(long, default_value = "per-pattern")]
    pub cells: String,
    /// Relative emptiness threshold used when routing states.
    #[arg(long, default_value_t = fluidtree::policy::POLICY_EPS_ZERO)]
    pub eps_zero: f64,
    /// Run seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output model directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// Network spec JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// Model directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Test dataset directory.
    #[arg(long)]
    pub test: PathBuf,
    /// Test states used for closed-loop cost ratios.
    #[arg(long, default_value_t = 20)]
    pub cost_samples: usize,
    /// Test states used for latency measurements.
    #[arg(long, default_value_t = 20)]
    pub timing_samples: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Report JSON.
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Network spec JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// Model directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Initial state, comma separated.
    #[arg(long)]
    pub x0: String,
    /// Euler step, or `auto` for horizon / 2000.
    #[arg(long, default_value = "auto")]
    pub h: String,
    /// Simulated horizon, or `auto` for the emptying-time bound.
    #[arg(long, default_value = "auto")]
    pub horizon: String,
    /// Trajectory CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeFormat {
    Text,
    Dot,
    Json,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportArgs {
    /// Model directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Output format.
    #[arg(long, value_enum, default_value_t = TreeFormat::Text)]
    pub format: TreeFormat,
    /// Export only this cell (0-based); all cells otherwise.
    #[arg(long)]
    pub cell: Option<usize>,
    /// Output file (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    /// Network spec JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// Optional model directory; adds policy inference timings.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Random interior states to time.
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    /// Run seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Optional report JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            eprintln!("error: cannot start {j} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Network(a) => commands::network(a),
        Command::Solve(a) => commands::solve(a),
        Command::Generate(a) => commands::generate(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::ExportTree(a) => commands::export_tree(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
