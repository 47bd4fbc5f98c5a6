//! `varchart`: calibrate control charts and estimate run lengths from the
//! command line. Results are appended to CSV files in the results directory
//! and echoed to stdout without the multi-line `config` column.

mod commands;
mod config;
mod error;
mod format;
mod store;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{resolve, Overrides};
use error::Result;
use store::{print_rows, ResultsStore};

#[derive(Parser, Debug)]
#[command(name = "varchart", version, about = "Control charts for variance increases in time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Find the control limit giving the target in-control ARL and cache it.
    Calibrate,
    /// Estimate the ARL for a change of size --delta at --tau (default 1).
    Arl,
    /// Estimate the average delay for a change at --tau.
    Delay {
        /// Report the largest delay over change points 1..=tau instead.
        #[arg(long)]
        worst: bool,
    },
    /// Out-of-control ARL table over the grid, minimized over reference values.
    Table,
    /// ARL as a function of the reference value at one (phi, delta).
    Sensitivity,
}

impl Command {
    fn file(self) -> &'static str {
        match self {
            Command::Calibrate => "calibrate.csv",
            Command::Arl => "arl.csv",
            Command::Delay { .. } => "delay.csv",
            Command::Table => "table.csv",
            Command::Sensitivity => "sensitivity.csv",
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    // everything is validated before the first replication runs
    let resolved = resolve(&cli.overrides.merged()?)?;
    let mut store = ResultsStore::open(&resolved.results_dir)?;
    let rows = match cli.command {
        Command::Calibrate => commands::calibrate(&resolved, &mut store)?,
        Command::Arl => commands::arl(&resolved, &mut store)?,
        Command::Delay { worst } => commands::delay(&resolved, &mut store, worst)?,
        Command::Table => commands::table(&resolved, &mut store)?,
        Command::Sensitivity => commands::sensitivity(&resolved, &mut store)?,
    };
    store.append(cli.command.file(), &rows)?;
    for row in &rows {
        if let Some((_, w)) = row.iter().find(|(k, v)| *k == "warning" && !v.is_empty()) {
            eprintln!("warning: {w}");
        }
    }
    let mut out = std::io::stdout().lock();
    print_rows(&mut out, &rows, &["config"])?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
