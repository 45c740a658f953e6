mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "quadwalk", version, about = "Quadruped rough-terrain planning and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plan body actions and footholds on a height grid.
    Plan(commands::PlanArgs),
    /// Optimize the CoG trajectory for a foothold plan.
    Optimize(commands::OptimizeArgs),
    /// Run the full pipeline on a scenario and write a report.
    Simulate(commands::SimulateArgs),
    /// Summarize run reports per scenario.
    Report(commands::ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Plan(a) => commands::plan(a),
        Command::Optimize(a) => commands::optimize_cmd(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
