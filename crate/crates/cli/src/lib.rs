//! Command-line driver: TOML configuration, subcommands and table output.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "homlab", version, about = "Periodic homogenization and resolvent laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the configuration and the coefficient field.
    Validate(Common),
    /// Solve the cell problems and report correctors and flux correctors.
    Cell(Common),
    /// Homogenized tensor only.
    Homogenize(Common),
    /// Resolvent solves at the first eps for every shift.
    Resolve(Common),
    /// Green columns and their decay fits.
    Green(Common),
    /// The (eps, lambda) sweep with rate and uniformity reports.
    Sweep(Common),
    /// Rebuild reports from an existing cells.csv.
    Report(Common),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Validate(c)
            | Command::Cell(c)
            | Command::Homogenize(c)
            | Command::Resolve(c)
            | Command::Green(c)
            | Command::Sweep(c)
            | Command::Report(c) => c,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Cell(_) => "cell",
            Command::Homogenize(_) => "homogenize",
            Command::Resolve(_) => "resolve",
            Command::Green(_) => "green",
            Command::Sweep(_) => "sweep",
            Command::Report(_) => "report",
        }
    }
}

/// Parse the configuration and run one subcommand.
pub fn run(command: &Command) -> homlab::Result<commands::Outcome> {
    let common = command.common();
    let cfg = config::parse_config(&common.config)?;
    let out = common.out.clone().or_else(|| cfg.out_dir.clone());
    if let Command::Validate(_) = command {
        return commands::validate_cmd(&cfg, out.as_deref());
    }
    let dir = out.ok_or_else(|| homlab::Error::config("output.dir", "no output directory; pass --out"))?;
    match command {
        Command::Validate(_) => unreachable!(),
        Command::Cell(_) => commands::cell_cmd(&cfg, &dir),
        Command::Homogenize(_) => commands::homogenize_cmd(&cfg, &dir),
        Command::Resolve(_) => commands::resolve_cmd(&cfg, &dir),
        Command::Green(_) => commands::green_cmd(&cfg, &dir),
        Command::Sweep(_) => commands::sweep_cmd(&cfg, &dir),
        Command::Report(_) => commands::report_cmd(&cfg, &dir),
    }
}
