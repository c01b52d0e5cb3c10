//! `aml`: train, evaluate and inspect atomized models from the command line.

mod axfile;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "aml", version, about = "Algebraic machine learning with sparse crossing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a toy data set or a random graph.
    Generate(GenerateArgs),
    /// Train a model and write checkpoint.json, progress.csv and model.json.
    Train(TrainArgs),
    /// Evaluate a model on a task.
    Eval(EvalArgs),
    /// Search for a Hamiltonian cycle by training on its embedding.
    Hamiltonian(HamiltonianArgs),
    /// Print size histogram, per-label atoms and load of a model.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Task {
    VerticalBar,
    Mnist,
    Axioms,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Generated {
    VerticalBar,
    Graph,
}

#[derive(Args)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    what: Generated,
    /// Image side for the vertical-bar task.
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Random counterexamples for the vertical-bar task.
    #[arg(long, default_value_t = 2000)]
    negatives: usize,
    #[arg(long, default_value_t = 10)]
    nodes: usize,
    #[arg(long, default_value_t = 20)]
    edges: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Where the examples of a task come from.
#[derive(Args, Clone)]
pub struct TaskArgs {
    #[arg(long, value_enum)]
    task: Task,
    /// Vertical-bar image side.
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Vertical-bar counterexamples sampled with --data-seed.
    #[arg(long, default_value_t = 2000)]
    negatives: usize,
    /// Seed for sampling vertical-bar counterexamples.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// Axiom file for the axioms task.
    #[arg(long)]
    axioms: Option<PathBuf>,
    #[arg(long)]
    train_idx: Option<PathBuf>,
    #[arg(long)]
    train_labels: Option<PathBuf>,
    #[arg(long)]
    test_idx: Option<PathBuf>,
    #[arg(long)]
    test_labels: Option<PathBuf>,
    /// Use only the first N images of each IDX file.
    #[arg(long)]
    limit: Option<usize>,
    /// Intensity levels; 2 selects the black/white layout.
    #[arg(long, default_value_t = 2)]
    levels: usize,
    /// Binarization threshold for the black/white layout.
    #[arg(long, default_value_t = aml::embed::DEFAULT_THRESHOLD)]
    threshold: u8,
    #[arg(long, default_value_t = 10)]
    classes: usize,
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// key=value file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    max_batches: Option<usize>,
    /// full, fixed:N or linear:START,FRACTION,RAMP.
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    error_every: Option<usize>,
    /// Keep training after the union model reaches zero training error.
    #[arg(long)]
    no_stop: bool,
    /// Skip the one-entry-per-negative dual reduction.
    #[arg(long)]
    no_reduce: bool,
    /// Independent replicas (seeds seed, seed+1, ...) whose union models
    /// are merged into model.json.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Drop redundant atoms from model.json.
    #[arg(long)]
    remove_redundant: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Union,
    Master,
}

#[derive(Args)]
pub struct EvalArgs {
    /// model.json or checkpoint.json.
    #[arg(long)]
    model: PathBuf,
    /// Model taken from a checkpoint.
    #[arg(long, value_enum, default_value_t = Which::Union)]
    which: Which,
    #[command(flatten)]
    task: TaskArgs,
    /// Reduce the model with subset selection before evaluating.
    #[arg(long)]
    select: bool,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also train and score a logistic head on atom activations.
    #[arg(long)]
    head: bool,
    /// Atoms feeding the head; a seeded sample when the model is larger.
    #[arg(long, default_value_t = 4000)]
    head_atoms: usize,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    /// Write metric,key,value rows here.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
pub struct HamiltonianArgs {
    /// Edge list: first line "v e", then one 1-based "a b" pair per line.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Random Hamiltonian graph size, used without --graph.
    #[arg(long, default_value_t = 10)]
    nodes: usize,
    #[arg(long, default_value_t = 20)]
    edges: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Add unwanted-path axioms for readings that cannot become a cycle.
    #[arg(long)]
    feedback: bool,
    #[arg(long, default_value_t = 300)]
    max_attempts: usize,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(Args)]
pub struct InspectArgs {
    /// model.json or checkpoint.json.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value_t = Which::Union)]
    which: Which,
    /// Label constant to list atoms for; repeatable. Defaults to constants
    /// named `p` or starting with `label`.
    #[arg(long = "label")]
    labels: Vec<String>,
    /// Atoms listed per label.
    #[arg(long, default_value_t = 20)]
    top: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Hamiltonian(a) => commands::hamiltonian(a),
        Command::Inspect(a) => commands::inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
