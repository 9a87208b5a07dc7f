mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Assert(Vec<String>),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Assert(_) => 3,
        }
    }
}

impl From<infograph::Error> for CliError {
    fn from(e: infograph::Error) -> Self {
        match e {
            infograph::Error::InvalidConfig(m) => CliError::Usage(format!("invalid configuration: {m}")),
            other => CliError::Data(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(m) | CliError::Data(m) => eprintln!("error: {m}"),
                CliError::Assert(failures) => {
                    for f in failures {
                        eprintln!("assertion failed: {f}");
                    }
                }
            }
            ExitCode::from(e.code())
        }
    }
}
