use std::process::ExitCode;

use clap::Parser;
use ctflood_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(files) => {
            if cli.out.is_none() {
                for f in files {
                    print!("{}", f.contents);
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ctflood: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
