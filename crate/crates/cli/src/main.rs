use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = articulate_cli::Cli::parse();
    match articulate_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
