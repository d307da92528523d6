use std::process::ExitCode;

use clap::Parser;
use qubit_hierarchy::cli::{error_record, exit_code, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            println!("{}", out.record);
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", error_record(&err));
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
