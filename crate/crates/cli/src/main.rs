use std::process::ExitCode;

use bohm_cli::args::Cli;
use bohm_cli::run;
use clap::Parser;

fn main() -> ExitCode {
    let (command, args) = Cli::parse().command.split();
    match args.config(command).and_then(run) {
        Ok(m) => {
            println!("\n# materialised configuration\n{}", m.config.emit());
            if m.passed {
                return ExitCode::SUCCESS;
            }
            for c in m.failed_checks() {
                eprintln!("check failed: {}: {}", c.name, c.detail);
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
