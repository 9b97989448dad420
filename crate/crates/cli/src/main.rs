use std::process::ExitCode;

use clap::Parser;
use gamma_osdp_cli::{exit_code, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GAMMA_OSDP_LOG", "warn")).init();
    let cli = Cli::parse();
    match gamma_osdp_cli::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
