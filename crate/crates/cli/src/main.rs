//! `coinforge`: generation, verification, simulation and analysis of
//! committee-based weak common coins.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Derive(a) => commands::derive(a),
        Command::GenCommittees(a) => commands::gen_committees(a),
        Command::GenGraphs(a) => commands::gen_graphs(a),
        Command::Verify(a) => commands::verify(a),
        Command::RunCoin(a) => commands::run_coin(a),
        Command::RunCrusader(a) => commands::run_crusader(a),
        Command::RunPublish(a) => commands::run_publish(a),
        Command::EstimateFairness(a) => commands::estimate_fairness(a),
        Command::VerifyAnticoncentration(a) => commands::verify_anticoncentration(a),
        Command::CostReport(a) => commands::cost_report(a),
        Command::Leader(a) => commands::leader(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
