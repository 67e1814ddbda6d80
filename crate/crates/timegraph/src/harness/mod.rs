//! Property checking over recorded runs: per-run verdict reports, an
//! independent brute-force oracle, seeded scenario generation, and
//! replayable adversary scripts that force output alternations.

pub mod oracle;
pub mod scenarios;
pub mod scripts;

pub use oracle::brute_force_extraction_oracle;
pub use scenarios::random_scenario;
pub use scripts::{
    count_alternations, pair_counterexample, tree_nonexact_counterexample, AdversaryScript,
    AlternationMetric, Expectation,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::graphs::{
    is_compatible, is_dicut, Dicut, FamilyTag, GraphFamily, ProcessId, TimelinessGraph,
};
use crate::protocol::{ProtocolRegistry, Tick};
use crate::simnet::{run_full, EventKind, Scenario, Simulation, Trace};

/// Outcome of one property check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    /// The property was checked and does not hold; the string says where.
    Fail(String),
    /// The property is not meaningful for this run; the string says why.
    NotApplicable(String),
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }

    /// True unless the verdict is an outright failure.
    pub fn passes_or_na(&self) -> bool {
        !matches!(self, Verdict::Fail(_))
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => write!(f, "PASS"),
            Verdict::Fail(why) => write!(f, "FAIL ({why})"),
            Verdict::NotApplicable(why) => write!(f, "N/A ({why})"),
        }
    }
}

/// Switches for checks that only run on request.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalOptions {
    /// Check exactness even for families that do not promise it.
    pub require_exactness: bool,
}

/// Every verdict the checker can issue for one run, plus the stable output
/// they were issued against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyReport {
    /// Whether the convergence verdict passed.
    pub converged: bool,
    /// Last tick at which any correct process changed its output, when they
    /// all ended on one common graph.
    pub stabilization_tick: Option<Tick>,
    /// The common final output of the correct processes, if there is one.
    pub final_graph: Option<TimelinessGraph>,
    pub convergence: Verdict,
    pub compatibility: Verdict,
    pub closure: Verdict,
    pub validity: Verdict,
    pub exactness: Verdict,
    pub root_correct: Verdict,
    pub efficiency: Verdict,
    pub monotonicity: Verdict,
    pub fifo: Verdict,
    pub timeliness: Verdict,
}

impl PropertyReport {
    /// The verdicts with their report labels, in display order.
    pub fn verdicts(&self) -> [(&'static str, &Verdict); 10] {
        [
            ("convergence", &self.convergence),
            ("compatibility", &self.compatibility),
            ("closure", &self.closure),
            ("validity", &self.validity),
            ("exactness", &self.exactness),
            ("root_correct", &self.root_correct),
            ("efficiency", &self.efficiency),
            ("monotonicity", &self.monotonicity),
            ("fifo", &self.fifo),
            ("timeliness", &self.timeliness),
        ]
    }

    /// True when no verdict failed (not-applicable verdicts do not count
    /// against a run).
    pub fn all_pass(&self) -> bool {
        self.verdicts().iter().all(|(_, v)| v.passes_or_na())
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "converged: {}", self.converged)?;
        match self.stabilization_tick {
            Some(t) => writeln!(f, "stabilization_tick: {t}")?,
            None => writeln!(f, "stabilization_tick: -")?,
        }
        match &self.final_graph {
            Some(g) => writeln!(f, "final_graph: {g}")?,
            None => writeln!(f, "final_graph: -")?,
        }
        for (name, verdict) in self.verdicts() {
            writeln!(f, "{name}: {verdict}")?;
        }
        Ok(())
    }
}

/// Runs `scenario` under the named algorithm and checks every property on
/// the resulting trace. Returns the finished simulation too, so callers can
/// inspect final protocol states.
pub fn evaluate_run(
    scenario: &Scenario,
    algo: &str,
    registry: &ProtocolRegistry,
    opts: &EvalOptions,
) -> Result<(Simulation, PropertyReport)> {
    let sim = run_full(scenario, algo, registry)?;
    let report = build_report(
        sim.trace(),
        scenario,
        sim.family(),
        sim.monitor().violations(),
        opts,
    );
    Ok((sim, report))
}

/// Checks every property of a recorded trace against the scenario it claims
/// to come from. The pairing is verified first: the trace header must carry
/// the scenario's digest, and a deterministic re-execution must reproduce
/// the recorded events exactly; counter monotonicity is taken from that
/// re-execution. A trace that is a truncated prefix of the replay is
/// accepted as an honest but incomplete recording: it is reported on as
/// recorded, except that convergence fails (stability through the horizon
/// is not attested). Any other divergence is rejected as an input error.
pub fn check_properties(
    trace: &Trace,
    scenario: &Scenario,
    family: &GraphFamily,
    registry: &ProtocolRegistry,
    opts: &EvalOptions,
) -> Result<PropertyReport> {
    let digest = scenario.digest()?;
    if trace.header.scenario != digest {
        return Err(Error::Input(format!(
            "trace was recorded against scenario digest {} but this scenario hashes to {digest}",
            trace.header.scenario
        )));
    }
    let replay = run_full(scenario, &trace.header.algo, registry)?;
    let replayed = &replay.trace().events;
    if *replayed != trace.events {
        if replayed.starts_with(&trace.events) {
            let mut report =
                build_report(trace, scenario, family, replay.monitor().violations(), opts);
            report.converged = false;
            report.stabilization_tick = None;
            report.convergence = Verdict::Fail(format!(
                "trace records only {} of the run's {} events; stability through \
                 the horizon is not attested",
                trace.events.len(),
                replayed.len()
            ));
            return Ok(report);
        }
        return Err(Error::Input(
            "trace does not match a deterministic replay of its scenario".into(),
        ));
    }
    Ok(build_report(
        trace,
        scenario,
        family,
        replay.monitor().violations(),
        opts,
    ))
}

fn fmt_procs(set: &BTreeSet<ProcessId>) -> String {
    let items: Vec<String> = set.iter().map(ToString::to_string).collect();
    format!("{{{}}}", items.join(","))
}

/// Computes the full report from a verified (trace, scenario) pair.
fn build_report(
    trace: &Trace,
    scenario: &Scenario,
    family: &GraphFamily,
    violations: &[String],
    opts: &EvalOptions,
) -> PropertyReport {
    let correct = scenario.correct();
    let horizon = scenario.horizon;
    let finals = trace.final_outputs();

    // Convergence: every correct process must end on the same graph, and the
    // last of them must have settled there no later than half the horizon
    // (our finite-run reading of "from some point on, forever").
    let mut t_star: Tick = 0;
    let mut ending: BTreeSet<Option<&TimelinessGraph>> = BTreeSet::new();
    for p in &correct {
        match finals.get(p) {
            None => {
                ending.insert(None);
            }
            Some((tick, out)) => {
                t_star = t_star.max(*tick);
                ending.insert(out.as_ref());
            }
        }
    }
    let final_graph: Option<TimelinessGraph> = if ending.len() == 1 {
        ending.first().copied().flatten().cloned()
    } else {
        None
    };
    let convergence = if correct.is_empty() {
        Verdict::NotApplicable("no process stays correct".into())
    } else if ending.len() > 1 {
        Verdict::Fail(format!(
            "correct processes ended on {} different outputs",
            ending.len()
        ))
    } else if final_graph.is_none() {
        Verdict::Fail("correct processes never produced an output".into())
    } else if t_star * 2 > horizon {
        Verdict::Fail(format!(
            "outputs only settled at tick {t_star}, past half the horizon {horizon}"
        ))
    } else {
        Verdict::Pass
    };
    let converged = convergence.is_pass();
    let stabilization_tick = final_graph.as_ref().map(|_| t_star);

    let no_graph = || Verdict::Fail("no common final graph to check".into());

    let compatibility = match &final_graph {
        None => no_graph(),
        Some(g) => {
            let restricted = g.induced(&correct);
            if is_compatible(&restricted, &scenario.truth) {
                Verdict::Pass
            } else {
                Verdict::Fail(format!(
                    "final graph restricted to correct processes is {restricted}, \
                     which is not compatible with the truth graph {}",
                    scenario.truth
                ))
            }
        }
    };

    let closure = match &final_graph {
        None => no_graph(),
        Some(g) => {
            let nodes = g.node_set();
            let x_side: BTreeSet<ProcessId> = nodes.intersection(&correct).copied().collect();
            let y_side: BTreeSet<ProcessId> = nodes.difference(&correct).copied().collect();
            if y_side.is_empty() {
                // Restriction removed nothing: final[Correct] = final.
                Verdict::Pass
            } else {
                match is_dicut(
                    g,
                    &Dicut {
                        x_side,
                        y_side: y_side.clone(),
                    },
                ) {
                    Ok(true) => Verdict::Pass,
                    Ok(false) => Verdict::Fail(format!(
                        "crashed processes {} kept in the final graph have edges back \
                         into the correct part",
                        fmt_procs(&y_side)
                    )),
                    Err(e) => Verdict::Fail(e.to_string()),
                }
            }
        }
    };

    let validity = match &final_graph {
        None => no_graph(),
        Some(g) => {
            if family.contains(g) {
                Verdict::Pass
            } else {
                Verdict::Fail(format!(
                    "{g} is not a member of the {} family",
                    family.tag().name()
                ))
            }
        }
    };

    let exact_family = matches!(
        family.tag(),
        FamilyTag::Sc | FamilyTag::Complete | FamilyTag::Ring | FamilyTag::Bic
    );
    let exactness = if !exact_family && !opts.require_exactness {
        Verdict::NotApplicable(format!(
            "the {} family does not promise exact extraction",
            family.tag().name()
        ))
    } else {
        match &final_graph {
            None => no_graph(),
            Some(g) => {
                let nodes = g.node_set();
                if nodes == correct {
                    Verdict::Pass
                } else {
                    Verdict::Fail(format!(
                        "final node set {} differs from the correct set {}",
                        fmt_procs(&nodes),
                        fmt_procs(&correct)
                    ))
                }
            }
        }
    };

    let root_correct = if !matches!(family.tag(), FamilyTag::Star | FamilyTag::Tree) {
        Verdict::NotApplicable("only star and tree families name a root".into())
    } else {
        match &final_graph {
            None => no_graph(),
            Some(g) => match g.root() {
                Some(r) if correct.contains(&r) => Verdict::Pass,
                Some(r) => Verdict::Fail(format!("final graph is rooted at crashed process {r}")),
                None => Verdict::Fail("final graph has no root".into()),
            },
        }
    };

    let efficiency = if trace.header.algo != "efficient" {
        Verdict::NotApplicable("only the communication-efficient algorithm bounds its sends".into())
    } else {
        match &final_graph {
            None => no_graph(),
            Some(g) => {
                // The guarantee is eventual: from some tick on, every
                // point-to-point send by a correct process rides an edge of
                // the final graph.  Outputs can settle while a doomed
                // candidate still drains in the background, so the check is
                // anchored to the trace's final quarter rather than to the
                // output stabilization tick.
                let quiet_after = horizon - horizon / 4;
                let mut verdict = Verdict::Pass;
                for ev in trace.of_kind(EventKind::Send) {
                    if ev.tick <= quiet_after || !correct.contains(&ev.process) {
                        continue;
                    }
                    let Some(to) = ev.detail_process("to") else {
                        continue;
                    };
                    if !g.contains_edge(ev.process, to) {
                        verdict = Verdict::Fail(format!(
                            "process {} sent to {to} at tick {} over a link outside the \
                             final graph (traffic must confine itself to the extracted \
                             graph by the final quarter of the run)",
                            ev.process, ev.tick
                        ));
                        break;
                    }
                }
                verdict
            }
        }
    };

    let empty_trace = trace.events.is_empty();
    let monotonicity = if empty_trace {
        Verdict::NotApplicable("empty trace".into())
    } else if violations.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail(format!(
            "{} counter regression(s); first: {}",
            violations.len(),
            violations[0]
        ))
    };

    let fifo = if empty_trace {
        Verdict::NotApplicable("empty trace".into())
    } else {
        let mut verdict = Verdict::Pass;
        let mut last_seq: BTreeMap<(ProcessId, ProcessId), u64> = BTreeMap::new();
        for ev in trace.events.iter() {
            if !matches!(ev.kind, EventKind::Deliver | EventKind::RbDeliver) {
                continue;
            }
            let (Some(from), Some(seq)) = (ev.detail_process("from"), ev.detail_u64("seq")) else {
                continue;
            };
            let link = (from, ev.process);
            if last_seq.get(&link).is_some_and(|prev| seq <= *prev) {
                verdict = Verdict::Fail(format!(
                    "link {from}->{} delivered sequence number {seq} after {}",
                    ev.process, last_seq[&link]
                ));
                break;
            }
            last_seq.insert(link, seq);
        }
        verdict
    };

    let timeliness = if empty_trace {
        Verdict::NotApplicable("empty trace".into())
    } else {
        let mut verdict = Verdict::Pass;
        for ev in trace.events.iter() {
            if !matches!(ev.kind, EventKind::Deliver | EventKind::RbDeliver) {
                continue;
            }
            let (Some(from), Some(send)) = (ev.detail_process("from"), ev.detail_u64("send"))
            else {
                continue;
            };
            if scenario.truth.contains_edge(from, ev.process) {
                let delay = ev.tick - send;
                if delay > scenario.delta {
                    verdict = Verdict::Fail(format!(
                        "delivery on timely link {from}->{} took {delay} ticks \
                         (bound {})",
                        ev.process, scenario.delta
                    ));
                    break;
                }
            }
        }
        verdict
    };

    PropertyReport {
        converged,
        stabilization_tick,
        final_graph,
        convergence,
        compatibility,
        closure,
        validity,
        exactness,
        root_correct,
        efficiency,
        monotonicity,
        fifo,
        timeliness,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::TraceHeader;

    fn pid(id: u32) -> ProcessId {
        ProcessId(id)
    }

    fn graph(nodes: &[u32], edges: &[(u32, u32)]) -> TimelinessGraph {
        TimelinessGraph::new(
            nodes.iter().copied().map(ProcessId),
            edges.iter().map(|&(a, b)| (ProcessId(a), ProcessId(b))),
        )
        .unwrap()
    }

    #[test]
    fn ring_run_with_a_crash_passes_every_applicable_check() {
        let registry = ProtocolRegistry::builtin();
        let truth = graph(&[0, 1, 2], &[(0, 1), (1, 2), (2, 0)]);
        let mut scenario = Scenario::minimal(4, FamilyTag::Ring, truth);
        scenario.crashes.insert(pid(3), 10);

        let (sim, report) =
            evaluate_run(&scenario, "basic", &registry, &EvalOptions::default()).unwrap();
        assert!(report.converged, "report was:\n{report}");
        assert!(report.all_pass(), "report was:\n{report}");
        assert!(report.exactness.is_pass(), "ring extraction must be exact");
        assert_eq!(
            report.root_correct,
            Verdict::NotApplicable("only star and tree families name a root".into())
        );
        assert_eq!(
            report.final_graph,
            Some(graph(&[0, 1, 2], &[(0, 1), (1, 2), (2, 0)]))
        );

        // Oracle soundness: the run's final graph is one the brute-force
        // enumeration admits — here, the only one.
        let oracle = brute_force_extraction_oracle(&scenario, sim.family());
        assert_eq!(oracle, vec![report.final_graph.clone().unwrap()]);
    }

    #[test]
    fn tree_run_keeps_a_late_crashed_node_behind_a_dicut() {
        let registry = ProtocolRegistry::builtin();
        let truth = graph(&[0, 1], &[(0, 1)]);
        let mut scenario = Scenario::minimal(3, FamilyTag::Tree, truth);
        scenario.crashes.insert(pid(2), 150);

        let (sim, report) =
            evaluate_run(&scenario, "basic", &registry, &EvalOptions::default()).unwrap();
        assert!(report.all_pass(), "report was:\n{report}");
        let final_graph = report.final_graph.clone().unwrap();
        assert!(
            final_graph.contains_node(pid(2)),
            "a process that crashed long after its blame froze should be retained, got {final_graph}"
        );
        assert!(report.closure.is_pass());
        assert!(matches!(report.exactness, Verdict::NotApplicable(_)));
        let oracle = brute_force_extraction_oracle(&scenario, sim.family());
        assert!(oracle.contains(&final_graph));
    }

    #[test]
    fn efficient_run_passes_the_efficiency_check() {
        let registry = ProtocolRegistry::builtin();
        let truth = graph(&[0, 1, 2], &[(0, 1), (1, 2), (2, 0)]);
        let scenario = Scenario::minimal(3, FamilyTag::Ring, truth);
        let (_, report) =
            evaluate_run(&scenario, "efficient", &registry, &EvalOptions::default()).unwrap();
        assert!(report.all_pass(), "report was:\n{report}");
        assert!(report.efficiency.is_pass());
    }

    #[test]
    fn empty_trace_fails_with_diagnostics() {
        let truth = graph(&[0, 1, 2], &[(0, 1), (1, 2), (2, 0)]);
        let scenario = Scenario::minimal(3, FamilyTag::Ring, truth);
        let family = scenario.build_family().unwrap();
        let trace = Trace {
            header: TraceHeader {
                algo: "basic".into(),
                seed: scenario.seed,
                horizon: scenario.horizon,
                scenario: scenario.digest().unwrap(),
            },
            events: Vec::new(),
            notes: Vec::new(),
        };
        let report = build_report(&trace, &scenario, &family, &[], &EvalOptions::default());
        assert!(!report.converged);
        assert!(matches!(report.convergence, Verdict::Fail(_)));
        assert!(matches!(report.compatibility, Verdict::Fail(_)));
        assert!(matches!(report.closure, Verdict::Fail(_)));
        assert!(matches!(report.validity, Verdict::Fail(_)));
        assert!(matches!(report.exactness, Verdict::Fail(_)));
        assert!(matches!(report.monotonicity, Verdict::NotApplicable(_)));
        assert!(matches!(report.fifo, Verdict::NotApplicable(_)));
        assert!(matches!(report.timeliness, Verdict::NotApplicable(_)));
        assert!(!report.all_pass());
    }

    #[test]
    fn check_properties_rejects_a_foreign_or_doctored_trace() {
        let registry = ProtocolRegistry::builtin();
        let truth = graph(&[0, 1, 2], &[(0, 1), (1, 2), (2, 0)]);
        let scenario = Scenario::minimal(3, FamilyTag::Ring, truth);
        let family = scenario.build_family().unwrap();
        let sim = run_full(&scenario, "basic", &registry).unwrap();
        let mut trace = sim.into_trace();

        // Same events, different claimed scenario: digest mismatch.
        let mut other = scenario.clone();
        other.seed = 17;
        let err = check_properties(&trace, &other, &family, &registry, &EvalOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::Input(_)), "got {err}");

        // Right digest, tampered events: replay mismatch.
        let last = trace.events.len() - 1;
        trace.events[last].tick += 1;
        let err = check_properties(
            &trace,
            &scenario,
            &family,
            &registry,
            &EvalOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Input(_)), "got {err}");
    }

    #[test]
    fn truncated_trace_checks_as_unconverged() {
        let registry = ProtocolRegistry::builtin();
        let truth = graph(&[0, 1, 2], &[(0, 1), (1, 2), (2, 0)]);
        let scenario = Scenario::minimal(3, FamilyTag::Ring, truth);
        let family = scenario.build_family().unwrap();
        let mut trace = run_full(&scenario, "basic", &registry)
            .unwrap()
            .into_trace();
        trace.events.truncate(trace.events.len() / 2);

        let report = check_properties(
            &trace,
            &scenario,
            &family,
            &registry,
            &EvalOptions::default(),
        )
        .unwrap();
        assert!(!report.converged);
        assert!(matches!(report.convergence, Verdict::Fail(_)));
        assert!(!report.all_pass());
    }

    #[test]
    fn reports_are_deterministic_and_replay_checkable() {
        let registry = ProtocolRegistry::builtin();
        let truth = graph(&[0, 1, 2], &[(0, 1), (1, 2), (2, 0)]);
        let mut scenario = Scenario::minimal(4, FamilyTag::Ring, truth);
        scenario.crashes.insert(pid(3), 25);
        scenario.seed = 5;

        let (sim_a, report_a) =
            evaluate_run(&scenario, "basic", &registry, &EvalOptions::default()).unwrap();
        let (_, report_b) =
            evaluate_run(&scenario, "basic", &registry, &EvalOptions::default()).unwrap();
        assert_eq!(report_a, report_b);
        assert_eq!(report_a.to_string(), report_b.to_string());

        // The recorded trace re-checks to the identical report.
        let family = scenario.build_family().unwrap();
        let trace = sim_a.into_trace();
        let rechecked = check_properties(
            &trace,
            &scenario,
            &family,
            &registry,
            &EvalOptions::default(),
        )
        .unwrap();
        assert_eq!(rechecked, report_a);
    }
}
