use std::io::{ErrorKind, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mzm_cli::commands::{cmd_calibrate, cmd_compare, cmd_metrics, cmd_simulate, format_metrics};

/// Print a line to stdout, exiting quietly if the reading end of a pipe has
/// gone away.
fn emit(text: impl std::fmt::Display) {
    let mut out = std::io::stdout();
    if let Err(e) = writeln!(out, "{text}") {
        if e.kind() == ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("i/o error: cannot write to stdout: {e}");
        std::process::exit(3);
    }
}

/// Closed-loop laboratory for Mach-Zehnder modulator bias stabilization.
#[derive(Parser)]
#[command(name = "mzm-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trace CSV.
    Simulate {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Bypass the controller.
        #[arg(long)]
        open_loop: bool,
    },
    /// Run a scenario open- and closed-loop with the same seed and write
    /// both traces plus a summary.
    Compare {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory for open.csv, closed.csv and summary.txt.
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep the bias with zero drift and report the recovered half-wave
    /// voltage, quadrature bias and extinction ratio.
    Calibrate {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Recompute stability metrics from a trace CSV.
    Metrics {
        /// Trace CSV written by `simulate` or `compare`.
        csv: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            scenario,
            out,
            seed,
            open_loop,
        } => cmd_simulate(&scenario, &out, seed, open_loop).map(emit),
        Command::Compare {
            scenario,
            out,
            seed,
        } => cmd_compare(&scenario, &out, seed).map(emit),
        Command::Calibrate { scenario } => cmd_calibrate(&scenario).map(emit),
        Command::Metrics { csv } => cmd_metrics(&csv).map(|m| emit(format_metrics(&m))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
