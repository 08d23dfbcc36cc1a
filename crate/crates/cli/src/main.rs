use std::process::ExitCode;

use argus_cli::{run, Cli};
use argus_core::Execution;
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match run(cli.command, exec) {
        Ok(summary) => {
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            for n in &summary.notes {
                println!("{n}");
            }
            println!("wrote {} files to {}", summary.outputs.len() + 1, summary.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
