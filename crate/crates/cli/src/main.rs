//! `spreadlab`: configuration-driven front end for spreadlab-core.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::{CliError, CliResult};
use output::Emitter;

#[derive(Parser)]
#[command(name = "spreadlab", version, about = "Spreading speeds and periodic states of two competing species")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config, or a JSON config or manifest.
    #[arg(long)]
    config: PathBuf,
    /// Output root; overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long)]
    workers: Option<usize>,
    /// Report the decay-rate grid minimum without refinement.
    #[arg(long)]
    mu_grid_only: bool,
    /// Override the scenario's period count.
    #[arg(long)]
    periods: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Dispersion table and theoretical spreading speed.
    Speed(Common),
    /// Front simulation and empirical speed interval.
    Simulate(Common),
    /// Principal spectrum point of a coefficient or an invasion problem.
    Spectrum(Common),
    /// Persistence probe over a random ensemble.
    Persistence(Common),
    /// Monotone iteration towards coexistence states.
    Coexist(Common),
    /// Smallest bump that destabilizes the semitrivial state of u.
    Destabilize(Common),
    /// Super-solution construction checks.
    VerifySuper(Common),
    /// Speed under a list of coefficient shifts.
    Sweep(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Speed(c) => ("speed", c),
            Command::Simulate(c) => ("simulate", c),
            Command::Spectrum(c) => ("spectrum", c),
            Command::Persistence(c) => ("persistence", c),
            Command::Coexist(c) => ("coexist", c),
            Command::Destabilize(c) => ("destabilize", c),
            Command::VerifySuper(c) => ("verify-super", c),
            Command::Sweep(c) => ("sweep", c),
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let (name, common) = cli.command.parts();
    if let Some(n) = common.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size the worker pool: {e}")))?;
    }
    let mut cfg = RunConfig::load(&common.config)?;
    if common.mu_grid_only {
        cfg.scenario.mu_grid_only = true;
    }
    if let Some(p) = common.periods {
        cfg.scenario.periods = Some(p);
    }
    let root = common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    let mut em = Emitter::new(&root, &cfg);
    let outcome = match &cli.command {
        Command::Speed(_) => commands::speed(&cfg, &mut em),
        Command::Simulate(_) => commands::simulate(&cfg, &mut em),
        Command::Spectrum(_) => commands::spectrum(&cfg, &mut em),
        Command::Persistence(_) => commands::persistence(&cfg, &mut em),
        Command::Coexist(_) => commands::coexist(&cfg, &mut em),
        Command::Destabilize(_) => commands::destabilize(&cfg, &mut em),
        Command::VerifySuper(_) => commands::verify_super(&cfg, &mut em),
        Command::Sweep(_) => commands::sweep(&cfg, &mut em),
    }?;
    let dir = em.finish(name, &cfg)?;
    println!("{}", outcome.summary);
    println!("wrote {}", dir.display());
    match outcome.failure {
        Some(msg) => Err(CliError::CheckFailed(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
