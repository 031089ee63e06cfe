use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracefem::commands::{cmd_solve, cmd_study, cmd_verify_geometry, Flags};

/// Trace finite element solver for the vector Laplacian on the unit sphere.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write an SVG convergence plot.
    #[arg(long, global = true)]
    plot: bool,
    /// Write the discrete solution on the surface as legacy VTK.
    #[arg(long, global = true)]
    vtk: bool,
    /// Suppress timings in the result files so reruns are byte-identical.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Only report warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,
    /// Output directory, overriding `output_dir` from the configuration.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study over the configured levels.
    Study { config: PathBuf },
    /// Solve on a single refinement level.
    Solve {
        config: PathBuf,
        #[arg(long)]
        level: u32,
    },
    /// Report geometry approximation errors per level.
    VerifyGeometry { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default)).format_timestamp(None).init();
    if let Ok(t) = std::env::var("TRACEFEM_THREADS") {
        match t.parse::<usize>() {
            Ok(n) if n >= 1 => {
                if n > 1 {
                    log::info!("TRACEFEM_THREADS={n}: the computation runs on one thread");
                }
            }
            _ => {
                log::error!("TRACEFEM_THREADS must be a positive integer, got {t:?}");
                return ExitCode::from(1);
            }
        }
    }
    let flags = Flags { plot: cli.plot, vtk: cli.vtk, deterministic: cli.deterministic, quiet: cli.quiet, output: cli.output };
    let exit = match &cli.command {
        Command::Study { config } => cmd_study(config, &flags),
        Command::Solve { config, level } => cmd_solve(config, *level, &flags),
        Command::VerifyGeometry { config } => cmd_verify_geometry(config, &flags),
    };
    ExitCode::from(exit as u8)
}
