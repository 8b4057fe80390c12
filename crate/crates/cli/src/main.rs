use std::process::ExitCode;

use clap::Parser;
use faultadapt_cli::{execute, Cli};
use serde_json::json;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let doc = json!({ "error": { "kind": "usage", "message": e.to_string().trim_end() } });
            eprintln!("{doc}");
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
