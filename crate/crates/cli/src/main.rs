use std::process::ExitCode;

use clap::Parser;
use tvvar_cli::{execute, Cli, CliError};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            if e.use_stderr() {
                eprintln!("{}", CliError::config(e.kind().to_string()).to_json());
            }
            return ExitCode::from(code as u8);
        }
    };
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("tvvar: {}", e.message);
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
