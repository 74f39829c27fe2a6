mod args;
mod commands;
mod oracle;
mod util;

use args::{Cli, Command};
use clap::Parser;
use rsfringe::detector::OracleError;
use std::process::ExitCode;

const EXIT_USAGE: u8 = 2;
const EXIT_ORACLE: u8 = 3;

/// Oracle failures exit 3; everything else that goes wrong is the caller's input.
fn exit_code(err: &anyhow::Error) -> u8 {
    let oracle = err
        .chain()
        .filter_map(|e| e.downcast_ref::<OracleError>())
        .any(|e| !matches!(e, OracleError::Input(_)));
    if oracle {
        EXIT_ORACLE
    } else {
        EXIT_USAGE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let invocation = serde_json::to_value(&cli.command).expect("arguments serialize");
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a, &invocation),
        Command::AttackDos(a) => commands::attack_dos(a, &invocation),
        Command::AttackDodge(a) => commands::attack_dodge(a, &invocation),
        Command::Defend(a) => commands::defend(a, &invocation),
        Command::Sweep(a) => commands::sweep(a, &invocation),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
