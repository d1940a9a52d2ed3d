use std::process::ExitCode;

use clap::Parser;
use spp_core::harness::{execute_compare, execute_run, validate_command, Cli, Command};
use spp_core::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_MISMATCH: u8 = 3;

fn run(command: &Command) -> spp_core::Result<bool> {
    validate_command(command)?;
    match command {
        Command::Run(cfg) => {
            let doc = execute_run(cfg)?;
            if cfg.out.is_none() {
                print!("{}", doc.to_json()?);
            }
            Ok(true)
        }
        Command::Compare(cfg) => {
            let report = execute_compare(cfg)?;
            for (i, d) in report.comparison.dimensions.iter().enumerate() {
                println!(
                    "x{i}: |delta| = {:.6}, threshold = {:.6}, {}",
                    d.delta,
                    d.threshold,
                    if d.pass { "pass" } else { "FAIL" }
                );
            }
            Ok(report.comparison.pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_MISMATCH),
        Err(Error::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
