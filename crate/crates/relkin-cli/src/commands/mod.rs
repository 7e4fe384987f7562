//! One module per CLI command. Each parses its options from [`Params`],
//! runs, and returns a [`Report`] plus the files to write.

pub mod bessel;
pub mod collision;
pub mod eos;
pub mod euler;
pub mod hilbert;
pub mod maxwellian;

use crate::config::Params;
use crate::report::Report;

/// Report and named output files of one command.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub report: Report,
    pub files: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    pub fn new(report: Report) -> Self {
        Self { report, files: Vec::new() }
    }

    pub fn file(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }
}

/// Maps a library error into `anyhow` with the failing step named.
pub(crate) fn lib<T>(what: &str, r: relkin::Result<T>) -> anyhow::Result<T> {
    r.map_err(|e| anyhow::anyhow!("{what}: {e}"))
}

/// Names accepted by [`Prepared::parse`], in CLI spelling.
pub const COMMANDS: [&str; 6] = [
    "bessel-verify",
    "eos-scan",
    "maxwellian-moments",
    "collision-check",
    "euler-run",
    "hilbert-build",
];

/// A command with its options parsed and validated.
#[derive(Debug, Clone)]
pub enum Prepared {
    Bessel(bessel::Options),
    Eos(eos::Options),
    Maxwellian(maxwellian::Options),
    Collision(Box<collision::Options>),
    Euler(euler::Options),
    Hilbert(hilbert::Options),
}

impl Prepared {
    pub fn parse(command: &str, params: &Params) -> anyhow::Result<Self> {
        Ok(match command {
            "bessel-verify" => Self::Bessel(bessel::Options::from_params(params)?),
            "eos-scan" => Self::Eos(eos::Options::from_params(params)?),
            "maxwellian-moments" => Self::Maxwellian(maxwellian::Options::from_params(params)?),
            "collision-check" => Self::Collision(Box::new(collision::Options::from_params(params)?)),
            "euler-run" => Self::Euler(euler::Options::from_params(params)?),
            "hilbert-build" => Self::Hilbert(hilbert::Options::from_params(params)?),
            other => anyhow::bail!("unknown command `{other}`"),
        })
    }

    pub fn run(&self, seed: u64) -> anyhow::Result<Outcome> {
        match self {
            Self::Bessel(o) => bessel::run(o),
            Self::Eos(o) => eos::run(o),
            Self::Maxwellian(o) => maxwellian::run(o, seed),
            Self::Collision(o) => collision::run(o, seed),
            Self::Euler(o) => euler::run(o),
            Self::Hilbert(o) => hilbert::run(o, seed),
        }
    }
}
