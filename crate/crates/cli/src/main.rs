//! `curvlab`: batch front end for the curvature, functional, Schwarz and flow
//! computations in `curvlab-core`.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::CliError;

#[derive(Parser, Debug)]
#[command(name = "curvlab", version, about = "Curvature diagnostics for Hermitian metrics on coordinate charts")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone, Serialize)]
pub struct GlobalArgs {
    /// Metric as `builtin:NAME(ARGS)` or `file:PATH`.
    #[arg(long, global = true)]
    pub metric: Option<String>,
    /// Points as `z1,z2;w1,w2`; coordinates may be complex, e.g. `0.1+0.2i`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub points: Option<String>,
    /// Sampling region: `metric`, `ball:R`, `polydisk:R`, `punctured:R` or `whole`.
    #[arg(long, global = true)]
    pub region: Option<String>,
    /// Number of points drawn from --region.
    #[arg(long, global = true, default_value_t = 8)]
    pub samples: usize,
    /// Finite-difference base step.
    #[arg(long, global = true, default_value_t = 1e-3, allow_hyphen_values = true)]
    pub h: f64,
    /// Finite-difference stencil order (2 or 4).
    #[arg(long, global = true, default_value_t = 4)]
    pub order: u8,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Tolerance for the residuals gating the exit code; each command has its own default.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub tol: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<std::path::PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Torsion, curvature, Ricci traces and identity residuals at points.
    Curvature(commands::curvature::CurvatureArgs),
    /// Sup or inf of a curvature functional with a witness.
    Scan(commands::scan::ScanArgs),
    /// Laplacian of the energy density of a holomorphic map.
    Schwarz(commands::schwarz::SchwarzArgs),
    /// Gauduchon-connection round trips and tempered cross-checks over a t-grid.
    Gauduchon(commands::gauduchon::GauduchonArgs),
    /// Explicit Euler integration of the tempered Hermitian curvature flow.
    Flow(commands::flow::FlowArgs),
    /// List or write the builtin metrics as metric files.
    Fixtures(commands::fixtures::FixturesArgs),
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("CURVLAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Config(format!("CURVLAB_THREADS='{}' is not a positive integer", value)))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<bool, CliError> {
    configure_threads()?;
    let g = &cli.global;
    match cli.command {
        Command::Curvature(a) => commands::curvature::run(g, &a),
        Command::Scan(a) => commands::scan::run(g, &a),
        Command::Schwarz(a) => commands::schwarz::run(g, &a),
        Command::Gauduchon(a) => commands::gauduchon::run(g, &a),
        Command::Flow(a) => commands::flow::run(g, &a),
        Command::Fixtures(a) => commands::fixtures::run(g, &a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("tolerance breach: see report");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("curvlab: {}", e);
            ExitCode::from(match e {
                CliError::Config(_) => 2,
                CliError::Numeric(_) => 3,
            })
        }
    }
}
