use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use relkin_cli::commands::Prepared;
use relkin_cli::config::Params;
use relkin_cli::report::OutDir;

#[derive(Debug, Parser)]
#[command(name = "relkin", version, about = "Relativistic kinetic theory toolkit: checks, scans and runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    /// Output directory; each command writes into a subdirectory named after it.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads (0 lets rayon decide).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Seed of every randomized check.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Parse and validate the configuration, then stop.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Recursion, derivative and ratio-bound checks of the scaled Bessel functions.
    BesselVerify,
    /// Equation-of-state scans and the inversion round trip.
    EosScan,
    /// Maxwellian moments against their closed forms.
    MaxwellianMoments,
    /// Collision operator equilibrium, invariants and linearized spectrum.
    CollisionCheck,
    /// Euler simulation with energy diagnostics; `verify = true` adds the solver suite.
    EulerRun,
    /// First-order Hilbert expansion around an Euler run.
    HilbertBuild,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::BesselVerify => "bessel-verify",
            Self::EosScan => "eos-scan",
            Self::MaxwellianMoments => "maxwellian-moments",
            Self::CollisionCheck => "collision-check",
            Self::EulerRun => "euler-run",
            Self::HilbertBuild => "hilbert-build",
        }
    }
}

fn params(cli: &Cli) -> Result<Params> {
    let mut p = match &cli.config {
        Some(path) => Params::load(path)?,
        None => Params::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').with_context(|| format!("--set `{kv}` is not KEY=VALUE"))?;
        p.set(k.trim(), v.trim());
    }
    Ok(p)
}

fn run(cli: &Cli) -> Result<bool> {
    let name = cli.command.name();
    let prepared = Prepared::parse(name, &params(cli)?)?;
    if cli.dry_run {
        println!("{name}: configuration ok");
        return Ok(true);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .context("starting the thread pool")?;
    let outcome = prepared.run(cli.seed)?;
    let dir = OutDir::create(&cli.out.join(name))?;
    for (file, bytes) in &outcome.files {
        dir.write(file, bytes)?;
    }
    let text = outcome.report.render();
    dir.write("report.txt", text.as_bytes())?;
    print!("{text}");
    Ok(outcome.report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
