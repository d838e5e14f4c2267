use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let result = match vld_cli::Cli::try_parse() {
        Ok(cli) => vld_cli::execute(cli),
        Err(e) => e.exit(),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
