//! `dfesim`: run the DFE link model from a flat configuration file.
//!
//! Exit status is 0 on success, 1 on a runtime or measurement failure and
//! 2 on a configuration error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "dfesim",
    version,
    about = "Behavioral one-tap DFE serial link simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One closed-loop run; writes trace.csv and prints a summary.
    Simulate { config: PathBuf },
    /// BER against sampling phase; writes bathtub.csv.
    Bathtub { config: PathBuf },
    /// Offset-code sweep with the tap off; writes calibration.csv.
    Calibrate { config: PathBuf },
    /// Tap-code sweep at `taps.reg_of`; writes tapsweep.csv.
    Tapsweep { config: PathBuf },
    /// Eye histogram of the comparator input; writes eye.csv.
    Eye {
        config: PathBuf,
        #[arg(long, default_value_t = 64)]
        time_bins: usize,
        #[arg(long, default_value_t = 64)]
        volt_bins: usize,
        /// Histogram the channel output instead of the equalized comparator input.
        #[arg(long)]
        raw: bool,
    },
    /// Channel pulse response; writes pulse.csv.
    Pulse {
        config: PathBuf,
        #[arg(long, default_value_t = 8)]
        n_ui: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(err.exit_code())
        }
    }
}
