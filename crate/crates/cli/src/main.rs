use std::process::ExitCode;

use clap::Parser;
use rankdistill::commands::{run, Cli, Context};
use rankdistill::config::env_overrides;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version requests are not errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let ctx = Context { args: std::env::args().skip(1).collect(), env: env_overrides() };
    match run(cli, &ctx) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
