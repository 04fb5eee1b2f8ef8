//! The `etflock` command line.
//!
//! Exit codes: 0 on success, 1 when the input (arguments, scenario, record)
//! is rejected, 2 when a run aborts or outputs cannot be written.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::output;
use crate::plot::{self, PlotKind};
use crate::scenario::Scenario;
use crate::simulator;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_ABORTED: i32 = 2;

/// Default output directory when neither `--out`, `ETFLOCK_OUT_DIR` nor the
/// scenario's `[output] directory` is given.
pub const DEFAULT_OUT_DIR: &str = "etflock-out";

#[derive(Debug, Parser)]
#[command(
    name = "etflock",
    version,
    about = "Event-triggered flocking of Euler-Lagrange agents"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write states, events, metrics and a summary.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides `simulation.seed` (and the graph seed when it follows it).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "ETFLOCK_OUT_DIR")]
        out: Option<PathBuf>,
        /// Accept trigger parameters outside (0, 1).
        #[arg(long)]
        allow_unstable_gains: bool,
        /// Also render every figure into the output directory.
        #[arg(long)]
        plots: bool,
    },
    /// Check a scenario without running it.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        allow_unstable_gains: bool,
    },
    /// Render a figure from a recorded run directory.
    Plot {
        #[arg(long)]
        record: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Where to write the SVG; defaults to the record directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a built-in scenario to a file.
    Preset {
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Trajectory,
    Velocity,
    Events,
    Metrics,
}

impl From<KindArg> for PlotKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Trajectory => PlotKind::Trajectory,
            KindArg::Velocity => PlotKind::Velocity,
            KindArg::Events => PlotKind::Events,
            KindArg::Metrics => PlotKind::Metrics,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    execute(cli.command)
}

fn invalid(e: impl std::fmt::Display) -> i32 {
    eprintln!("error: {e}");
    EXIT_INVALID
}

pub fn execute(command: Command) -> i32 {
    match command {
        Command::Validate {
            scenario,
            allow_unstable_gains,
        } => match Scenario::load(&scenario).and_then(|s| s.validate(allow_unstable_gains)) {
            Ok(()) => {
                println!("{}: ok", scenario.display());
                EXIT_OK
            }
            Err(e) => invalid(e),
        },
        Command::Preset { name, out } => {
            let s = match Scenario::preset(&name) {
                Ok(s) => s,
                Err(e) => return invalid(e),
            };
            if let Err(e) = std::fs::write(&out, s.to_toml_string()) {
                eprintln!("error: {}: {e}", out.display());
                return EXIT_ABORTED;
            }
            println!("wrote preset {name} to {}", out.display());
            EXIT_OK
        }
        Command::Plot { record, kind, out } => {
            let run = match output::read_run(&record) {
                Ok(r) => r,
                Err(e) => return invalid(e),
            };
            let dir = out.unwrap_or_else(|| record.clone());
            if let Err(e) = std::fs::create_dir_all(&dir) {
                eprintln!("error: {}: {e}", dir.display());
                return EXIT_ABORTED;
            }
            match plot::render(&run, kind.into(), &dir) {
                Ok(path) => {
                    println!("wrote {}", path.display());
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_ABORTED
                }
            }
        }
        Command::Run {
            scenario,
            seed,
            out,
            allow_unstable_gains,
            plots,
        } => {
            let mut s = match Scenario::load(&scenario) {
                Ok(s) => s,
                Err(e) => return invalid(e),
            };
            if let Some(seed) = seed {
                s.simulation.seed = seed;
            }
            let prepared = match s.prepare(allow_unstable_gains) {
                Ok(p) => p,
                Err(e) => return invalid(e),
            };
            let dir = out
                .or_else(|| s.output.directory.clone())
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
            let (record, abort) = match simulator::run(prepared.world, &prepared.config) {
                Ok(r) => (r, None),
                Err(a) => {
                    eprintln!("error: {a}");
                    (a.record, Some(a.cause))
                }
            };
            let summary = match output::write_run(&dir, &s, &record, abort.as_ref()) {
                Ok(summary) => summary,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_ABORTED;
                }
            };
            if plots {
                let rendered = output::read_run(&dir).and_then(|run| {
                    PlotKind::ALL
                        .into_iter()
                        .try_for_each(|k| plot::render(&run, k, &dir).map(|_| ()))
                });
                if let Err(e) = rendered {
                    eprintln!("error: {e}");
                    return EXIT_ABORTED;
                }
            }
            let m = &summary.monitors;
            println!(
                "{}: {} steps, {} events, lyapunov_monotone={} collision_free={} consensus_reached={} zeno_excluded={}",
                dir.display(),
                summary.steps_completed,
                summary.event_statistics.total,
                m.lyapunov_monotone,
                m.collision_free,
                m.consensus_reached,
                m.zeno_excluded
            );
            if abort.is_some() {
                EXIT_ABORTED
            } else {
                EXIT_OK
            }
        }
    }
}
