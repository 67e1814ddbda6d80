//! Replayable adversary schedules. Each script is an ordinary scenario whose
//! delay directives stage message arrivals so that a named process is forced
//! to keep switching its output, plus a machine-checkable expectation for
//! how often. The pair script shows why families without rooted members
//! defeat stabilization; the tree script shows why claiming an exact node
//! set is untenable once a silent process can be mistaken for a crashed one.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::graphs::{FamilyTag, ProcessId, TimelinessGraph};
use crate::simnet::{DelayDirective, EventKind, Scenario, Trace};

/// How an output graph is classified into one of the two buckets whose
/// alternation the script counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlternationMetric {
    /// Classify by exact edge set.
    EdgeSets {
        a: BTreeSet<(ProcessId, ProcessId)>,
        b: BTreeSet<(ProcessId, ProcessId)>,
    },
    /// Classify by exact node set.
    NodeSets {
        a: BTreeSet<ProcessId>,
        b: BTreeSet<ProcessId>,
    },
}

impl AlternationMetric {
    /// The bucket an output falls in, if either; outputs matching neither
    /// bucket are ignored by the count.
    fn classify(&self, output: Option<&TimelinessGraph>) -> Option<u8> {
        let g = output?;
        match self {
            AlternationMetric::EdgeSets { a, b } => {
                let edges: BTreeSet<(ProcessId, ProcessId)> = g.edges().iter().copied().collect();
                if edges == *a {
                    Some(0)
                } else if edges == *b {
                    Some(1)
                } else {
                    None
                }
            }
            AlternationMetric::NodeSets { a, b } => {
                let nodes = g.node_set();
                if nodes == *a {
                    Some(0)
                } else if nodes == *b {
                    Some(1)
                } else {
                    None
                }
            }
        }
    }
}

/// What a script stages, and under which algorithm to demonstrate it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expectation {
    /// The process whose output changes are classified.
    pub process: ProcessId,
    /// Registry name of the algorithm the script targets.
    pub algo: String,
    pub metric: AlternationMetric,
    pub min_alternations: u64,
}

/// A named, replayable scenario together with the outcome it stages.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryScript {
    pub name: String,
    pub scenario: Scenario,
    pub expected: Expectation,
}

/// Counts how often the observed process's classified output switched
/// buckets over the trace, collapsing consecutive same-bucket outputs and
/// skipping outputs that match neither bucket.
pub fn count_alternations(trace: &Trace, expected: &Expectation) -> u64 {
    let mut flips = 0;
    let mut last: Option<u8> = None;
    for ev in trace.of_kind(EventKind::OutputChange) {
        if ev.process != expected.process {
            continue;
        }
        if let Some(bucket) = expected.metric.classify(ev.output.as_ref()) {
            if last.is_some_and(|prev| prev != bucket) {
                flips += 1;
            }
            last = Some(bucket);
        }
    }
    flips
}

/// The pair script can stage at most this many alternations: each one
/// spends one of the two deterministic full accusation rounds (the timer
/// expiries at ticks 1 and 3, before any heartbeat can restart a timer)
/// from one side's feeder links.
pub const PAIR_FLIP_CAP: u64 = 4;

/// Builds a five-process scenario over the pair family in which process 4 is
/// forced to switch its output back and forth between the two timely pairs
/// {0,1} and {2,3} at least `flips` times under the general algorithm.
///
/// Both pairs stay timely throughout — the adversary only controls when the
/// early accusation rounds of processes 0..3 *reach* process 4. Landing one
/// side's round adds blame to that side's full-universe pair graph while the
/// other side's stays untouched, so the least-blamed member seesaws. All
/// remaining feeder traffic is parked until long after the staged phases.
pub fn pair_counterexample(flips: u64) -> Result<AdversaryScript> {
    if flips == 0 {
        return Err(Error::Input("flips must be at least 1".into()));
    }
    if flips > PAIR_FLIP_CAP {
        return Err(Error::Capacity(format!(
            "cannot stage {flips} alternations: only {PAIR_FLIP_CAP} deterministic \
             accusation rounds fit this horizon"
        )));
    }
    let n = 5;
    let observer = ProcessId(4);
    let truth = TimelinessGraph::new(
        (0..n).map(ProcessId),
        [(0, 1), (1, 0), (2, 3), (3, 2)].map(|(a, b)| (ProcessId(a), ProcessId(b))),
    )?;
    let mut scenario = Scenario::minimal(n, FamilyTag::Pair, truth);

    // Stage j lands one side's accusation round at tick 30 + 10j. Sides
    // alternate {0,1} / {2,3}; the first two stages use the tick-1 round,
    // the next two the tick-3 round.
    for stage in 0..flips {
        let side: [u32; 2] = if stage % 2 == 0 { [0, 1] } else { [2, 3] };
        let window_start = if stage < 2 { 1 } else { 3 };
        let arrival = 30 + 10 * stage;
        for p in side {
            scenario.delays.push(DelayDirective {
                from: ProcessId(p),
                to: observer,
                window: (window_start, window_start + 1),
                min_delay: arrival - window_start,
            });
        }
    }
    // Park everything else the feeders send at the observer (heartbeats,
    // later accusations) until long after the staged phases, keeping the
    // seesaw undisturbed. Rounds not consumed by a stage are parked too.
    for p in 0..4u32 {
        let side_index = u64::from(p / 2);
        let staged_rounds = (0..flips).filter(|j| j % 2 == side_index).count();
        let start = match staged_rounds {
            0 => 1,
            1 => 3,
            _ => 5,
        };
        scenario.delays.push(DelayDirective {
            from: ProcessId(p),
            to: observer,
            window: (start, scenario.horizon),
            min_delay: 400,
        });
    }
    scenario.validate()?;

    let pair = |x: u32, y: u32| -> BTreeSet<(ProcessId, ProcessId)> {
        [(ProcessId(x), ProcessId(y)), (ProcessId(y), ProcessId(x))]
            .into_iter()
            .collect()
    };
    Ok(AdversaryScript {
        name: format!("pair-alternation-{flips}"),
        scenario,
        expected: Expectation {
            process: observer,
            algo: "basic".into(),
            metric: AlternationMetric::EdgeSets {
                a: pair(0, 1),
                b: pair(2, 3),
            },
            min_alternations: flips,
        },
    })
}

/// The tree script schedules one silence window per two alternations; this
/// many fit the default horizon with room for the delayed heartbeats to
/// drain between windows.
pub const TREE_FLIP_CAP: u64 = 8;

/// Builds a three-process scenario over the tree family in which an
/// algorithm that insists its output's node set equal the processes it
/// currently trusts (the `basic-exact` registry entry) must flip between
/// node sets {0,1,2} and {0,1} at least `flips` times, while the standard
/// algorithm on the very same schedule keeps a closed, compatible output.
///
/// Each staged window withholds process 2's heartbeats from both peers long
/// enough for their timers to expire — so 2 looks crashed — then lets them
/// through again.
pub fn tree_nonexact_counterexample(flips: u64) -> Result<AdversaryScript> {
    if flips == 0 {
        return Err(Error::Input("flips must be at least 1".into()));
    }
    if flips > TREE_FLIP_CAP {
        return Err(Error::Capacity(format!(
            "cannot stage {flips} alternations: only {TREE_FLIP_CAP} fit the horizon"
        )));
    }
    let truth = TimelinessGraph::new(
        [0, 1, 2].map(ProcessId),
        [(ProcessId(0), ProcessId(1)), (ProcessId(0), ProcessId(2))],
    )?;
    let mut scenario = Scenario::minimal(3, FamilyTag::Tree, truth);

    // Each window yields one flip out (suspect) and one flip back (trust
    // again) at both peers; the expectation counts process 0's flips.
    let windows = flips.div_ceil(2);
    for j in 0..windows {
        let start = 40 + 100 * j;
        for to in [0u32, 1] {
            scenario.delays.push(DelayDirective {
                from: ProcessId(2),
                to: ProcessId(to),
                window: (start, start + 29),
                min_delay: 60,
            });
        }
    }
    scenario.validate()?;

    Ok(AdversaryScript {
        name: format!("tree-node-set-alternation-{flips}"),
        scenario,
        expected: Expectation {
            process: ProcessId(0),
            algo: "basic-exact".into(),
            metric: AlternationMetric::NodeSets {
                a: [0, 1, 2].map(ProcessId).into_iter().collect(),
                b: [0, 1].map(ProcessId).into_iter().collect(),
            },
            min_alternations: flips,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{evaluate_run, EvalOptions};
    use crate::protocol::ProtocolRegistry;
    use crate::simnet::{run_scenario, TraceEvent, TraceHeader};

    #[test]
    fn zero_flips_is_an_input_error_and_too_many_a_capacity_error() {
        assert!(matches!(pair_counterexample(0), Err(Error::Input(_))));
        assert!(matches!(
            pair_counterexample(PAIR_FLIP_CAP + 1),
            Err(Error::Capacity(_))
        ));
        assert!(matches!(
            tree_nonexact_counterexample(0),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            tree_nonexact_counterexample(TREE_FLIP_CAP + 1),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn counting_collapses_repeats_and_skips_unclassified_outputs() {
        let metric = AlternationMetric::NodeSets {
            a: [ProcessId(0), ProcessId(1)].into_iter().collect(),
            b: [ProcessId(0)].into_iter().collect(),
        };
        let expected = Expectation {
            process: ProcessId(0),
            algo: "basic".into(),
            metric,
            min_alternations: 0,
        };
        let g = |nodes: &[u32]| {
            Some(TimelinessGraph::new(nodes.iter().copied().map(ProcessId), []).unwrap())
        };
        let outputs = [
            g(&[0, 1]),
            g(&[0, 1]),
            g(&[0]),
            g(&[0, 2]),
            None,
            g(&[0, 1]),
        ];
        let events = outputs
            .into_iter()
            .enumerate()
            .map(|(i, output)| TraceEvent {
                tick: i as u64,
                process: ProcessId(0),
                kind: EventKind::OutputChange,
                detail: String::new(),
                output,
            })
            .collect();
        let trace = Trace {
            header: TraceHeader {
                algo: "basic".into(),
                seed: 0,
                horizon: 10,
                scenario: "x".into(),
            },
            events,
            notes: Vec::new(),
        };
        // a, a (collapsed), b, skipped, skipped, a  =>  a->b, b->a.
        assert_eq!(count_alternations(&trace, &expected), 2);
    }

    #[test]
    fn pair_script_forces_the_staged_alternations() {
        let registry = ProtocolRegistry::builtin();
        let script = pair_counterexample(3).unwrap();
        let trace = run_scenario(&script.scenario, &script.expected.algo, &registry).unwrap();
        let flips = count_alternations(&trace, &script.expected);
        assert!(
            flips >= script.expected.min_alternations,
            "staged 3 alternations, observed {flips}"
        );
    }

    #[test]
    fn pair_script_never_touches_the_timely_pairs() {
        let script = pair_counterexample(PAIR_FLIP_CAP).unwrap();
        for d in &script.scenario.delays {
            assert!(
                !script.scenario.truth.contains_edge(d.from, d.to),
                "directive on timely link {}->{}",
                d.from,
                d.to
            );
        }
        // And the observed run keeps every timely-link delivery within delta.
        let registry = ProtocolRegistry::builtin();
        let (_, report) = evaluate_run(
            &script.scenario,
            &script.expected.algo,
            &registry,
            &EvalOptions::default(),
        )
        .unwrap();
        assert!(report.timeliness.is_pass());
    }

    #[test]
    fn tree_script_breaks_the_exact_strawman_but_not_the_standard_algorithm() {
        let registry = ProtocolRegistry::builtin();
        let script = tree_nonexact_counterexample(3).unwrap();

        let strawman = run_scenario(&script.scenario, &script.expected.algo, &registry).unwrap();
        let flips = count_alternations(&strawman, &script.expected);
        assert!(
            flips >= script.expected.min_alternations,
            "staged 3 alternations, observed {flips}"
        );

        // The standard algorithm rides out the same schedule: its output
        // keeps the silent process behind a dicut and stays stable.
        let (_, report) = evaluate_run(
            &script.scenario,
            "basic",
            &registry,
            &EvalOptions::default(),
        )
        .unwrap();
        assert!(report.closure.is_pass(), "report was:\n{report}");
        assert!(report.all_pass(), "report was:\n{report}");
    }

    #[test]
    fn scripts_round_trip_through_scenario_files() {
        let script = pair_counterexample(2).unwrap();
        let text = script.scenario.to_toml().unwrap();
        let back = Scenario::from_toml(&text).unwrap();
        assert_eq!(back, script.scenario);
        assert_eq!(back.digest().unwrap(), script.scenario.digest().unwrap());
    }
}
