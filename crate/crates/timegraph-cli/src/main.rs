//! Command-line front end: run scenarios, re-verify recorded traces,
//! inspect graph families, and generate adversary scenarios.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use timegraph::graphs::{FamilyTag, GraphFamily};
use timegraph::harness::{
    check_properties, evaluate_run, pair_counterexample, tree_nonexact_counterexample, EvalOptions,
};
use timegraph::protocol::ProtocolRegistry;
use timegraph::simnet::{Scenario, Trace};
use timegraph::{Error, Result};

#[derive(Parser)]
#[command(
    name = "timegraph",
    about = "Deterministic simulator and property checker for timeliness-graph extraction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario under an extraction algorithm and record its trace.
    Run {
        /// Scenario file (TOML).
        #[arg(long)]
        scenario: PathBuf,
        /// Algorithm registry name (see `--help` for the built-ins).
        #[arg(long, default_value = "basic")]
        algo: String,
        /// Override the scenario's horizon, in ticks.
        #[arg(long)]
        horizon: Option<u64>,
        /// Override the scenario's random seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the run's trace (JSON lines) here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Verify a recorded trace against its scenario and print the property
    /// report. Exits 0 only if every applicable property passes.
    Check {
        /// Trace file produced by `run --trace`.
        #[arg(long)]
        trace: PathBuf,
        /// The scenario the trace claims to come from.
        #[arg(long)]
        scenario: PathBuf,
        /// Apply the same horizon override used at run time, if any.
        #[arg(long)]
        horizon: Option<u64>,
        /// Apply the same seed override used at run time, if any.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Enumerate a graph family and report whether it is dicut-closed.
    Family {
        /// Family name: ASYNC, COMPLETE, STAR, TREE, RING, SC, BIC or PAIR.
        #[arg(long)]
        family: String,
        /// Number of processes.
        #[arg(long)]
        n: u32,
    },
    /// Generate a replayable adversary scenario that forces output
    /// alternations.
    Counterexample {
        /// Which construction: "pair" or "tree".
        #[arg(long)]
        kind: String,
        /// How many output alternations to stage.
        #[arg(long, default_value_t = 3)]
        flips: u64,
        /// Where to write the generated scenario file.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    let registry = ProtocolRegistry::builtin();
    match cli.command {
        Command::Run {
            scenario,
            algo,
            horizon,
            seed,
            trace,
        } => {
            let mut sc = Scenario::load(&scenario)?;
            apply_overrides(&mut sc, horizon, seed)?;
            let (sim, report) = evaluate_run(&sc, &algo, &registry, &EvalOptions::default())?;
            if let Some(path) = &trace {
                sim.trace().save(path)?;
            }
            match (report.stabilization_tick, &report.final_graph) {
                (Some(tick), Some(graph)) => {
                    println!("stabilized at tick {tick} on {graph}");
                }
                _ => println!("no common stable output"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check {
            trace,
            scenario,
            horizon,
            seed,
        } => {
            let stored = Trace::load(&trace)?;
            let mut sc = Scenario::load(&scenario)?;
            apply_overrides(&mut sc, horizon, seed)?;
            let family = sc.build_family()?;
            let report =
                check_properties(&stored, &sc, &family, &registry, &EvalOptions::default())?;
            print!("{report}");
            Ok(if report.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Family { family, n } => {
            let tag: FamilyTag = family.parse()?;
            let fam = GraphFamily::generate(tag, n)?;
            println!("{} over {} processes: {} members", tag.name(), n, fam.len());
            match fam.is_dicut_closed() {
                (true, _) => println!("dicut-closed: yes"),
                (false, witness) => {
                    println!("dicut-closed: no");
                    if let Some(w) = witness {
                        println!(
                            "witness: member {} reduced to its part {{{}}} gives {}, \
                             which is not a member",
                            w.member,
                            w.x_side
                                .iter()
                                .map(ToString::to_string)
                                .collect::<Vec<_>>()
                                .join(","),
                            w.reduced
                        );
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Counterexample { kind, flips, out } => {
            let script = match kind.as_str() {
                "pair" => pair_counterexample(flips)?,
                "tree" => tree_nonexact_counterexample(flips)?,
                other => {
                    return Err(Error::Config(format!(
                        "unknown counterexample kind {other:?} (expected \"pair\" or \"tree\")"
                    )))
                }
            };
            script.scenario.save(&out)?;
            println!("wrote {} to {}", script.name, out.display());
            println!(
                "replay with: timegraph run --scenario {} --algo {} --trace <out>; \
                 expect at least {} output alternations at process {}",
                out.display(),
                script.expected.algo,
                script.expected.min_alternations,
                script.expected.process
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn apply_overrides(sc: &mut Scenario, horizon: Option<u64>, seed: Option<u64>) -> Result<()> {
    if let Some(h) = horizon {
        sc.horizon = h;
    }
    if let Some(s) = seed {
        sc.seed = s;
    }
    // Loading already validated the file; re-validate only what overrides
    // can break (horizon interactions with crash ticks and drops).
    if horizon.is_some() || seed.is_some() {
        sc.validate()?;
    }
    Ok(())
}
