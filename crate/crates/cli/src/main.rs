use std::process::ExitCode;

use clap::Parser;
use ctree_cli::{run, Args};

fn main() -> ExitCode {
    let args = Args::parse();
    let spec = match args.spec() {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!("ctree: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&spec) {
        Ok(outcome) => {
            for note in &outcome.notes {
                eprintln!("ctree: note: {note}");
            }
            for f in &outcome.failures {
                eprintln!("ctree: cell {} ({}) failed: {}", f.cell, f.description, f.error);
            }
            eprintln!(
                "ctree: {} cells, {} files in {}",
                outcome.cells,
                outcome.files.len(),
                outcome.out.display()
            );
            if outcome.succeeded() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("ctree: {e}");
            ExitCode::from(2)
        }
    }
}
