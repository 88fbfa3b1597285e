use std::process::ExitCode;

use clap::Parser;
use rvgp_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.common.log_level).init();
    match run(&cli) {
        Ok(manifest) => {
            log::info!("wrote {} outputs", manifest.outputs.len());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
