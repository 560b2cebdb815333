//! `ptlg`: batch front end for the non-Hermitian qubit, Leggett–Garg and
//! three-level Lindblad computations.
//!
//! Exit codes: 0 success, 1 acceptance failure, 2 configuration, 3 numerical
//! failure, 4 failed cross-check.

mod commands;
mod error;
mod manifest;
mod options;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::CliError;
use options::*;

#[derive(Parser, Debug)]
#[command(
    name = "ptlg",
    version,
    about = "Non-Hermitian qubit dynamics and temporal correlations"
)]
struct Cli {
    /// TOML file with one section per subcommand; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for scans (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bloch trajectory and speed of evolution on a uniform time grid.
    Evolve(EvolveOpts),
    /// Extremal speeds on the geodesic over a γ grid.
    SoeScan(SoeScanOpts),
    /// K3 and the three joint-probability tables for one configuration.
    K3(K3Opts),
    /// Maximized K3 for each γ.
    K3Scan(K3ScanOpts),
    /// Time-optimized K3 over initial states with the measurement fixed.
    FixedScan(FixedScanOpts),
    /// Three-level master equation, closed forms and post-selection.
    Lindblad(LindbladOpts),
    /// Run the acceptance suite.
    Verify(VerifyOpts),
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let file = ConfigFile::load(cli.config.as_deref())?;
    match cli.command {
        Command::Evolve(o) => commands::evolve(o.or(file.evolve)),
        Command::SoeScan(o) => commands::soe_scan(o.or(file.soe_scan)),
        Command::K3(o) => commands::k3(o.or(file.k3)),
        Command::K3Scan(o) => commands::k3_scan(o.or(file.k3_scan)),
        Command::FixedScan(o) => commands::fixed_scan(o.or(file.fixed_scan)),
        Command::Lindblad(o) => commands::lindblad(o.or(file.lindblad)),
        Command::Verify(o) => commands::verify(o.or(file.verify)),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ptlg: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
