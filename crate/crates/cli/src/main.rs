//! `fadelink` command line: experiment runs, spec validation, inline SNR
//! sweeps, and CSV-to-SVG plotting.
//!
//! Exit codes: 0 success, 2 validation failure, 3 convergence failure,
//! 4 I/O failure.

// validation guards use negated comparisons so NaN inputs fail them too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod plot;
mod runner;

use clap::{Parser, Subcommand};
use runner::{CliError, SweepArgs};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "fadelink",
    version,
    about = "Link-level delay/throughput/erasure experiments over lognormal fading channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment spec: Monte Carlo sweeps plus optional analytic
    /// companion tables, all emitted as CSV.
    Run {
        /// TOML experiment spec.
        spec: PathBuf,
    },
    /// Check every invariant of a spec without running it; reports all
    /// violations.
    Validate {
        /// TOML experiment spec.
        spec: PathBuf,
    },
    /// One-off sweep driven by flags instead of a spec file.
    Sweep {
        /// SNR grid in dB, comma separated.
        #[arg(long = "snr-db", value_delimiter = ',', required = true)]
        snr_db: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// uncoded | coded
        #[arg(long, default_value = "uncoded")]
        scheme: String,
        /// fixed | adaptive
        #[arg(long, default_value = "fixed")]
        policy: String,
        /// One-step log-gain correlation in [0, 1]; no default is assumed.
        #[arg(long)]
        a1: f64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Packets per episode.
        #[arg(long = "n-data", default_value_t = 5)]
        n_data: usize,
        /// Coded packets per round (coded scheme; defaults to n_data).
        #[arg(long)]
        ni: Option<usize>,
        /// Bits per packet for the erasure composition.
        #[arg(long = "bits-per-packet", default_value_t = 1)]
        bits_per_packet: u32,
    },
    /// Render one CSV column against another as an SVG polyline chart.
    Plot {
        /// Input CSV (comment lines starting with # are skipped).
        csv: PathBuf,
        /// Column name for the x axis.
        #[arg(long)]
        x: String,
        /// Column name for the y axis.
        #[arg(long)]
        y: String,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { spec } => runner::run(&spec),
        Command::Validate { spec } => runner::validate(&spec),
        Command::Sweep {
            snr_db,
            episodes,
            seed,
            scheme,
            policy,
            a1,
            out,
            n_data,
            ni,
            bits_per_packet,
        } => runner::run_sweep(&SweepArgs {
            snr_db,
            episodes,
            seed,
            scheme,
            policy,
            a1,
            out,
            n_data,
            ni,
            bits_per_packet,
        }),
        Command::Plot { csv, x, y, out } => plot::plot(&csv, &x, &y, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
