mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use groupsparse::selection::{Algorithm, SelectionConfig};

const EXIT_SOLVER: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Debug, Parser)]
#[command(name = "groupsparse", version, about = "Group-sparse selection: generate, select, verify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded random instance.
    Gen(GenArgs),
    /// Run a selection algorithm on an instance file.
    Select(SelectArgs),
    /// Column subset selection on a matrix (CSV or JSON).
    Css(CssArgs),
    /// Certify a claim on a seeded random suite.
    Verify(VerifyArgs),
    /// Time every algorithm on an instance.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Seed for generators and randomized solvers.
    #[arg(long, env = "GROUPSPARSE_SEED", default_value_t = 0)]
    seed: u64,
    /// JSON file with selection and solver settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    grad_tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Random restarts of the attention solver.
    #[arg(long)]
    restarts: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GenFamily {
    RidgeQuadratic,
    Logistic,
    Quadratic,
    NearIsotropic,
    Isotropic,
    Css,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: GenFamily,
    /// Output path. CSS matrices are written as CSV unless the name ends in `.json`.
    #[arg(long)]
    out: PathBuf,
    /// Number of groups for the quadratic families.
    #[arg(long, default_value_t = 6)]
    t: usize,
    /// Eigenvalue spread above 2 for near-isotropic quadratics.
    #[arg(long, default_value_t = 0.3)]
    spread: f64,
    #[arg(long, default_value_t = 8)]
    rows: usize,
    #[arg(long, default_value_t = 5)]
    cols: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Args)]
struct AlgorithmArgs {
    #[arg(long, value_parser = parse_algorithm, default_value = "omp")]
    algorithm: Algorithm,
    /// Target sparsity.
    #[arg(long)]
    k: usize,
    /// Groups to select; defaults to `k`.
    #[arg(long)]
    k_prime: Option<usize>,
    /// Swap rounds for OMPR.
    #[arg(long, default_value_t = 10)]
    rounds: usize,
    /// Relative offset below the threshold for the sequential algorithms.
    #[arg(long, default_value_t = groupsparse::selection::DEFAULT_DELTA)]
    delta: f64,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    algorithm: AlgorithmArgs,
    /// Directory for report.json, trace.jsonl, summary.csv and manifest.json.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LossArg {
    Frobenius,
    PseudoHuber,
}

#[derive(Debug, Args)]
struct CssArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[command(flatten)]
    algorithm: AlgorithmArgs,
    #[arg(long, value_enum, default_value = "frobenius")]
    loss: LossArg,
    /// Transition point of the pseudo-Huber loss.
    #[arg(long, default_value_t = 1.0)]
    huber_delta: f64,
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, value_parser = parse_claim)]
    claim: groupsparse::verify::Claim,
    /// Defaults to the suite size of the claim.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// CSV output path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: groupsparse::Error| e.to_string())
}

fn parse_claim(s: &str) -> Result<groupsparse::verify::Claim, String> {
    s.parse().map_err(|e: groupsparse::Error| e.to_string())
}

/// Failure of a subcommand, mapped to an exit status.
#[derive(Debug)]
enum Failure {
    Input(String),
    Solver(String),
    ClaimFailed,
}

impl From<groupsparse::Error> for Failure {
    fn from(e: groupsparse::Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Solver(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl Common {
    fn selection_config(&self) -> Result<SelectionConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?
            }
            None => SelectionConfig::default(),
        };
        cfg.seed = self.seed;
        if let Some(v) = self.grad_tol {
            cfg.solver.grad_tol = v;
        }
        if let Some(v) = self.max_iters {
            cfg.solver.max_iters = v;
        }
        if let Some(v) = self.restarts {
            cfg.restarts = v;
        }
        cfg.solver.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let argv: Vec<String> = std::env::args().collect();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(&a),
        Command::Select(a) => commands::select(&a, &argv),
        Command::Css(a) => commands::css(&a, &argv),
        Command::Verify(a) => commands::verify(&a, &argv),
        Command::Bench(a) => commands::bench(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_SOLVER)
        }
        Err(Failure::ClaimFailed) => ExitCode::FAILURE,
    }
}
