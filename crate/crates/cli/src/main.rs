use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use sipcert::{run, Cli, Command};

/// Usage errors share the input-error code.
const USAGE: u8 = 4;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(USAGE),
            };
        }
    };
    let json = match &cli.command {
        Command::Certify(a) | Command::Tcset(a) | Command::Admissible(a) => a.output.json,
        Command::Scan(a) => a.output.json,
        Command::Selftest(a) => a.output.json,
    };
    let (report, text) = run(&cli.command);
    if json {
        println!("{}", report.to_json());
    } else if report.error.is_some() {
        eprintln!("{}", text.trim_end());
    } else {
        println!("{}", text.trim_end());
    }
    ExitCode::from(report.exit_code as u8)
}
