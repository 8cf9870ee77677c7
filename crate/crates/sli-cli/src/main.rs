//! `sli` — batch driver for the shaken-lattice interferometry simulator.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 on numerical
//! failures (non-convergence, propagation faults, range violations).

mod commands;
mod config;
mod formats;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use commands::CmdResult;

#[derive(Parser)]
#[command(
    name = "sli",
    about = "Shaken-lattice interferometry: optimize waveforms, scan signals, quantify sensitivity",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize an order-n interferometer and persist the protocol
    Optimize {
        /// Experiment configuration (TOML); defaults apply when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// Interferometer order: total interrogation time is 0.4·n ms
        #[arg(long)]
        n: usize,
        /// Override the configured output directory
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Populations of a stored protocol versus applied acceleration
    Scan {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Protocol document produced by `optimize`
        #[arg(long)]
        protocol: PathBuf,
        /// Explicit comma-separated accelerations (m/s²), overriding the grid
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        min: Option<f64>,
        #[arg(long)]
        max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Minimum detectable acceleration per protocol, plus the scaling fit
    Sensitivity {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Protocol documents, one per interrogation time (at least three)
        #[arg(required = true)]
        protocols: Vec<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Fit the scaling law to an existing sensitivity table
    Fit {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Sensitivity TSV (columns: interrogation time s, δa)
        #[arg(long)]
        table: PathBuf,
        /// "free" or "fixed"
        #[arg(long)]
        c_mode: Option<String>,
        /// Offset pinned in "fixed" mode, m/s²
        #[arg(long)]
        c_value: Option<f64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Export a protocol as a signal-generator waveform table
    ExportWaveform {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        protocol: PathBuf,
        /// Samples per second; must exceed twice the largest series frequency
        #[arg(long)]
        sample_rate: Option<f64>,
        /// Output file (defaults to <output_dir>/waveform.tsv)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ground Bloch state diagnostics: populations and band frequencies
    GroundState {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CmdResult {
    match &cli.command {
        Command::Optimize { config, n, out_dir } => {
            commands::cmd_optimize(config.as_ref(), *n, out_dir.as_ref())
        }
        Command::Scan { config, protocol, grid, min, max, points, out_dir } => {
            commands::cmd_scan(
                config.as_ref(),
                protocol,
                grid.as_ref(),
                *min,
                *max,
                *points,
                out_dir.as_ref(),
            )
        }
        Command::Sensitivity { config, protocols, out_dir } => {
            commands::cmd_sensitivity(config.as_ref(), protocols, out_dir.as_ref())
        }
        Command::Fit { config, table, c_mode, c_value, out_dir } => commands::cmd_fit(
            config.as_ref(),
            table,
            c_mode.as_ref(),
            *c_value,
            out_dir.as_ref(),
        ),
        Command::ExportWaveform { config, protocol, sample_rate, out } => {
            commands::cmd_export_waveform(config.as_ref(), protocol, *sample_rate, out.as_ref())
        }
        Command::GroundState { config, out_dir } => {
            commands::cmd_ground_state(config.as_ref(), out_dir.as_ref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help/version requests are not usage errors
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
