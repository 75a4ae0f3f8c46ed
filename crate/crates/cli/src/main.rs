mod commands;
mod manifest;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ofdmim_core::ErrorKind;

#[derive(Parser)]
#[command(name = "ofdmim", version, about = "Outage-constrained power allocation for relayed OFDM-IM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw problem instances, label them with the search oracle and save them.
    GenData(commands::GenDataArgs),
    /// Train a network on a labeled dataset.
    Train(commands::TrainArgs),
    /// Solve one instance with the oracle and print the allocation.
    Solve(commands::SolveArgs),
    /// Compare a trained network with the oracle on held-out samples.
    Eval(commands::EvalArgs),
    /// Train one network per grid point and write the learning curves.
    Sweep(commands::SweepArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Train(a) => commands::train(a),
        Command::Solve(a) => commands::solve(a),
        Command::Eval(a) => commands::eval(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 2,
                ErrorKind::Infeasible => 3,
                ErrorKind::Io => 4,
                ErrorKind::Numeric => 5,
            })
        }
    }
}
