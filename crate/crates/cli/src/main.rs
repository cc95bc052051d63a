use std::process::ExitCode;

use smartcharge_cli::run::describe_infeasibility;
use smartcharge_cli::{parse_args, run, CliError, ExitStatus};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let command = match parse_args(&argv) {
        Ok(c) => c,
        Err(e) => {
            if e.exit_code == 0 {
                print!("{e}");
            } else {
                eprint!("{e}");
            }
            return ExitCode::from(e.exit_code as u8);
        }
    };
    match run(&command, &argv[1..]) {
        Ok(outcome) => {
            for file in &outcome.files {
                println!("{}", file.display());
            }
            if outcome.status != ExitStatus::Success {
                eprintln!(
                    "error: finished with failures; see the reports in {}",
                    outcome.out_dir.display()
                );
            }
            ExitCode::from(outcome.status.code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Infeasible(report) = &e {
                eprint!("{}", describe_infeasibility(report));
            }
            ExitCode::from(e.exit_status().code() as u8)
        }
    }
}
