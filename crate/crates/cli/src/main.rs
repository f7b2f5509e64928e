//! Command-line front end for the pipeline library.
//!
//! Exit codes: 0 on success, 1 for input problems (unreadable or invalid
//! configs, missing files, malformed artifacts), 2 for numeric failures
//! (non-convergence, instability). Stage subcommands are shorthand for a
//! run restricted to that one stage against existing artifacts.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nadyn_cli::config::RunConfig;
use nadyn_cli::pipeline::{run_stages, Stage, WORKERS_ENV};
use nadyn_core::ErrorClass;

#[derive(Parser)]
#[command(
    name = "nadyn",
    version,
    about = "Excited-state surfaces from a simulated quantum register, \
             coupled wavepacket dynamics on top",
    after_help = format!("Set {WORKERS_ENV} to cap the worker thread count.")
)]
struct Cli {
    /// Suppress progress output.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config and its referenced inputs without running anything.
    Validate { config: PathBuf },
    /// Execute the configured stage selection (default: all stages).
    Run { config: PathBuf },
    /// Scan the manifest geometries with the electronic solver.
    Surfaces { config: PathBuf },
    /// Evaluate derivative couplings from an existing scan.
    Nac { config: PathBuf },
    /// Resample scan and couplings onto the propagation grid.
    Interp { config: PathBuf },
    /// Propagate the coupled wavepacket on an existing fine bundle.
    Dynamics { config: PathBuf },
    /// Validate run artifacts and re-emit plot-ready tables.
    Plotdata { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests arrive here too; only real argument
            // problems count as input errors.
            let failed = e.use_stderr();
            let _ = e.print();
            return if failed { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e);
            match e.class() {
                ErrorClass::Input => ExitCode::from(1),
                ErrorClass::Numeric => ExitCode::from(2),
            }
        }
    }
}

fn dispatch(cli: &Cli) -> nadyn_core::Result<ExitCode> {
    let (path, only) = match &cli.command {
        Command::Validate { config } => {
            let cfg = RunConfig::load(config)?;
            let report = cfg.validate();
            for w in &report.warnings {
                println!("warning: {}", w);
            }
            for f in &report.fatal {
                println!("fatal: {}", f);
            }
            return Ok(if report.ok() {
                println!("ok");
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            });
        }
        Command::Run { config } => (config, None),
        Command::Surfaces { config } => (config, Some(Stage::Surfaces)),
        Command::Nac { config } => (config, Some(Stage::Nac)),
        Command::Interp { config } => (config, Some(Stage::Interp)),
        Command::Dynamics { config } => (config, Some(Stage::Dynamics)),
        Command::Plotdata { config } => (config, Some(Stage::PlotData)),
    };
    let mut cfg = RunConfig::load(path)?;
    if let Some(stage) = only {
        cfg.stages = Some(vec![stage]);
    }
    run_stages(&cfg, cli.quiet)?;
    Ok(ExitCode::SUCCESS)
}
