//! `cetool`: batch verification of certainty-equivalent policy bounds.
//!
//! Subcommands:
//! - `run`: execute the scenarios in a JSON config, write per-scenario
//!   reports (JSON + CSV), instance files, plot data, and a summary with a
//!   machine-readable pass/fail verdict. Exit status is 0 when every bound
//!   dominance check passes, 1 on any violation, 2 on config/IO errors.
//! - `explain`: print the additive decomposition of α_t from a report file.

mod config;
mod explain;
mod run;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cetool",
    version,
    about = "Certainty-equivalent policy bound verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModuliArg {
    Linear,
    Envelope,
}

impl From<ModuliArg> for cetool_core::bounds::ModuliKind {
    fn from(m: ModuliArg) -> Self {
        match m {
            ModuliArg::Linear => cetool_core::bounds::ModuliKind::Linear,
            ModuliArg::Envelope => cetool_core::bounds::ModuliKind::Envelope,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario suite described by a config file.
    Run {
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Moduli kind override.
        #[arg(long, value_enum)]
        moduli: Option<ModuliArg>,
        /// History-tree node budget override (also: env CETOOL_BUDGET).
        #[arg(long)]
        budget: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated family filter (e.g. bounded_noise,random).
        #[arg(long, value_delimiter = ',')]
        families: Option<Vec<String>>,
        /// Worker thread count (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the additive decomposition of alpha_t from a report.
    Explain {
        /// report.json produced by `run`.
        #[arg(long)]
        report: PathBuf,
        /// 1-based stage to decompose.
        #[arg(long)]
        t: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            moduli,
            budget,
            out,
            seed,
            families,
            workers,
        } => run::run(run::RunArgs {
            config,
            moduli: moduli.map(Into::into),
            budget,
            out,
            seed,
            families,
            workers,
        }),
        Command::Explain { report, t } => explain::explain(&report, t).map(|()| 0),
    };
    match outcome {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
