use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::{Kind, ShrinkerSpec};

/// Numerical laboratory for rescaled mean curvature flow near self-shrinkers.
#[derive(Debug, Parser)]
#[command(name = "shrinker-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a shrinker profile and write profile.csv, model.json and a manifest.
    Shrinker {
        kind: Kind,
        #[arg(long)]
        cone_slope: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
    /// Top eigenvalues of the Jacobi operator on a model file.
    Spectrum {
        model: PathBuf,
        #[arg(long, default_value_t = 8)]
        kmax: u32,
        #[arg(long, default_value_t = 5)]
        count: usize,
        /// Restrict to the ball of this radius.
        #[arg(long)]
        cutoff: Option<f64>,
        /// Dirichlet conditions on the cutoff.
        #[arg(long)]
        dirichlet: bool,
        /// Comma-separated radii for a Dirichlet sweep of the top eigenvalue.
        #[arg(long, value_delimiter = ',')]
        sweep: Vec<f64>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Rescaled mean curvature flow.
    Flow {
        #[command(subcommand)]
        action: FlowAction,
    },
    /// Feynman-Kac Monte Carlo.
    Fk {
        #[command(subcommand)]
        action: FkAction,
    },
    /// Perturbation experiments around a shrinker.
    Perturb {
        #[command(subcommand)]
        action: PerturbAction,
    },
}

#[derive(Debug, Subcommand)]
enum FlowAction {
    Run {
        config: PathBuf,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum FkAction {
    Solve {
        config: PathBuf,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum PerturbAction {
    Run {
        config: PathBuf,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("SHRINKER_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| format!("SHRINKER_LAB_THREADS must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        return Err("SHRINKER_LAB_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_VALIDATION);
    }
    let result = match &cli.command {
        Command::Shrinker { kind, cone_slope, samples, out } => {
            commands::shrinker(&ShrinkerSpec { kind: *kind, samples: *samples, cone_slope: *cone_slope, x_range: None }, out)
        }
        Command::Spectrum { model, kmax, count, cutoff, dirichlet, sweep, out } => commands::spectrum(&commands::SpectrumArgs {
            model,
            k_max: *kmax,
            count: *count,
            cutoff: *cutoff,
            dirichlet: *dirichlet,
            sweep,
            out: out.as_deref(),
        }),
        Command::Flow { action: FlowAction::Run { config, out } } => commands::flow_run(config, out),
        Command::Fk { action: FkAction::Solve { config, out } } => commands::fk_solve_cmd(config, out),
        Command::Perturb { action: PerturbAction::Run { config, out } } => commands::perturb_run(config, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { EXIT_VALIDATION } else { EXIT_NUMERICAL })
        }
    }
}
