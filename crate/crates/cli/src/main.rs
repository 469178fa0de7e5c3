mod args;
mod commands;
mod error;
mod io;
mod manifest;

use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches};

use args::{clap_exit_code, Cli};
use commands::Sources;

fn source(matches: Option<&ArgMatches>, id: &str) -> &'static str {
    let present = matches.filter(|m| m.ids().any(|i| i == id));
    match present.and_then(|m| m.value_source(id)) {
        Some(ValueSource::CommandLine) => "flag",
        Some(ValueSource::EnvVariable) => "env",
        _ => "default",
    }
}

fn main() -> ExitCode {
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(clap_exit_code(&e));
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(clap_exit_code(&e));
        }
    };
    let sub = matches.subcommand().map(|(_, m)| m);
    let sources = Sources {
        seed: source(sub, "seed"),
        epsilon: source(sub, "epsilon"),
    };
    match commands::run(cli, sources) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
