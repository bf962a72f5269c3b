//! Command-line front end for the lattice Boltzmann engine.

mod commands;
mod config;
mod expr;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Failure, OutDir};
use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "mrtlb",
    version,
    about = "MRT lattice Boltzmann solver for anisotropic diffusion with a linear source"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory; falls back to `[output] dir`, then the working directory.
    #[arg(long, short, global = true, env = "MRTLB_OUT_DIR")]
    out: Option<PathBuf>,
    /// Worker threads for scans and sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Synthesize weights and relaxation rates (params.csv, params.toml).
    Params,
    /// Structure check and von Neumann scan of the model (stability.csv).
    Stability,
    /// Stability or solvability raster over a parameter plane (region.csv).
    Region,
    /// Run a benchmark case to `t_final` (field.csv, run.csv).
    Run,
    /// Convergence study over `[converge] dx` (convergence.csv).
    Converge,
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(format!("cannot size the thread pool: {e}")))?;
    }
    let path = cli.config.as_ref().ok_or_else(|| Failure::config("missing --config <path>"))?;
    let text =
        std::fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = RunConfig::parse(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let dir = cli.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let out = OutDir(dir);
    match cli.command {
        Command::Params => commands::cmd_params(&cfg, &out),
        Command::Stability => commands::cmd_stability(&cfg, &out),
        Command::Region => commands::cmd_region(&cfg, &out),
        Command::Run => commands::cmd_run(&cfg, &out),
        Command::Converge => commands::cmd_converge(&cfg, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
