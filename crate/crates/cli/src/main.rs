//! `hobs`: command-line front end for designing, certifying, and
//! simulating hybrid observers for LTI plants with aperiodically sampled
//! output.
//!
//! Verbs:
//! - `design`: solve the guaranteed-cost LMIs at a (δ, η) point or over a
//!   grid; writes gains + certificate and a report.
//! - `verify`: search for a stability certificate at fixed gains.
//! - `simulate`: run the hybrid system and export the trajectory.
//! - `reproduce`: run the built-in benchmark end to end and check the
//!   expected values.
//!
//! Exit status contract: 0 optimal/feasible, 2 infeasible, 3 numerical
//! failure, 64 usage or parse error.

mod commands;
mod config;
mod error;
mod report;
mod reproduce;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use commands::CommonArgs;

#[derive(Debug, Parser)]
#[command(
    name = "hobs",
    version,
    about = "Design, certify, and simulate hybrid observers for LTI plants with aperiodically \
             sampled output"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Subcommand)]
enum Command {
    /// Solve the guaranteed-cost design LMIs; write gains and a report
    Design(CommonArgs),
    /// Search for a stability certificate at fixed observer gains
    Verify(CommonArgs),
    /// Simulate the hybrid error system and export the trajectory
    Simulate(CommonArgs),
    /// Run the built-in benchmark end to end and check expected values
    Reproduce(CommonArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0u8,
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Design(args) => commands::cmd_design(args),
        Command::Verify(args) => commands::cmd_verify(args),
        Command::Simulate(args) => commands::cmd_simulate(args),
        Command::Reproduce(args) => reproduce::cmd_reproduce(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
