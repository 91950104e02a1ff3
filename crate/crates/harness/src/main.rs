use std::io::Write;
use std::process::ExitCode;

use ising_relax_harness::{dispatch, parse_config};

fn main() -> ExitCode {
    match parse_config(std::env::args_os()).and_then(dispatch) {
        Ok(lines) => {
            let mut out = std::io::stdout().lock();
            for line in lines {
                if writeln!(out, "{line}").is_err() {
                    break;
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ising-relax: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
