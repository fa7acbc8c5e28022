//! Subcommand implementations. Each reads its configuration completely,
//! calls [`Run::ready`], then computes and writes its reports.

mod counterexamples;
mod dynamics;
mod energy;
mod fields;

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::output::{Output, Summary};
use clap::ValueEnum;
use mfcomm::fields::{GridField, GridSpec};
use mfcomm::rng::Seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Energy,
    Commutator,
    CounterexampleCef1,
    CounterexampleCef2,
    CounterexampleBmo1d,
    MollifyRates,
    Gronwall,
    Simulate,
    Coupled,
    Norms,
    Admissible,
}

impl Command {
    pub fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

pub struct Run {
    pub cfg: Config,
    pub seeds: Seeds,
    pub out: Output,
    pub summary: Summary,
}

impl Run {
    /// Rejects leftover keys and creates the output directory.
    pub fn ready(&mut self) -> CliResult<()> {
        self.cfg.finish()?;
        self.out.prepare()
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.summary.warnings.push(msg.into());
    }
}

pub fn dispatch(cmd: Command, run: &mut Run) -> CliResult<()> {
    match cmd {
        Command::Energy => energy::energy(run),
        Command::Commutator => energy::commutator(run),
        Command::CounterexampleCef1 => counterexamples::cef1(run),
        Command::CounterexampleCef2 => counterexamples::cef2(run),
        Command::CounterexampleBmo1d => counterexamples::bmo1d(run),
        Command::MollifyRates => fields::mollify_rates(run),
        Command::Gronwall => dynamics::gronwall(run),
        Command::Simulate => dynamics::simulate(run),
        Command::Coupled => dynamics::coupled(run),
        Command::Norms => fields::norms(run),
        Command::Admissible => fields::admissible(run),
    }
}

/// Cutoff equal to 1 on `|x| <= 1/2` and vanishing beyond `|x| = 1`.
fn cutoff(x: &[f64]) -> f64 {
    let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
    if r <= 0.5 {
        1.0
    } else if r >= 1.0 {
        0.0
    } else {
        let t = 2.0 * r - 1.0;
        let a = (-1.0 / (1.0 - t)).exp();
        let b = (-1.0 / t).exp();
        a / (a + b)
    }
}

pub const SYNTHETIC: [&str; 4] = ["xlogx", "abs", "gaussian", "sine"];

/// Scalar test functions of `x_1`, localized to the unit ball.
///
/// * `xlogx`: `x log|x|`, log-Lipschitz with a Zygmund `C^1` norm.
/// * `abs`: `|x|`, Lipschitz.
/// * `gaussian`, `sine`: smooth.
pub fn synthetic_field(kind: &str, spec: GridSpec) -> CliResult<GridField> {
    let f: fn(f64) -> f64 = match kind {
        "xlogx" => |x| if x == 0.0 { 0.0 } else { x * x.abs().ln() },
        "abs" => f64::abs,
        "gaussian" => |x| (-8.0 * x * x).exp(),
        "sine" => |x| (3.0 * x).sin(),
        other => return Err(CliError::config(format!("unknown field `{other}`"))),
    };
    Ok(GridField::from_fn(spec, |x| f(x[0]) * cutoff(x))?)
}
