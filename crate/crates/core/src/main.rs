use std::process::ExitCode;

use clap::Parser;
use xai_alignment::cli::{self, Cli};

fn main() -> ExitCode {
    let args = Cli::parse();
    match cli::dispatch(&args) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
