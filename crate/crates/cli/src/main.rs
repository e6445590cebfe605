use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use grace_cli::{run, RunConfig};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cfg = RunConfig::parse();
    match run(&cfg) {
        Ok(files) => {
            let files: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
            println!("{}", json!({ "status": "ok", "artifacts": files }));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": { "code": e.code(), "message": e.to_string() } }));
            ExitCode::FAILURE
        }
    }
}
