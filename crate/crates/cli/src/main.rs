use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = scimcp_cli::Cli::parse();
    match scimcp_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
