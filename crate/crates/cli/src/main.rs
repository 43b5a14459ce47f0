use std::process::ExitCode;

use clap::Parser;
use homlab_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = cli.command.common();
    let threads = common
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("error: cannot start {threads} worker threads: {e}");
        return ExitCode::from(2);
    }
    match run(&cli.command) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            if common.verbose {
                for f in &outcome.files {
                    eprintln!("wrote {}", f.display());
                }
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                for (study, item, detail) in &outcome.failures {
                    eprintln!("FAIL {study} {item}: {detail}");
                }
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error in {}: {e}", cli.command.name());
            ExitCode::from(2)
        }
    }
}
