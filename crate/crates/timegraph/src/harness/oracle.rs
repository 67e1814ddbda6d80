//! An independent brute-force oracle: enumerate the family and keep every
//! member that satisfies the extraction properties against the scenario's
//! ground truth. All checks work on raw integer sets, deliberately avoiding
//! the graph helpers the implementation under test relies on.

use std::collections::BTreeSet;

use crate::graphs::{GraphFamily, TimelinessGraph};
use crate::simnet::Scenario;

/// Every family member a correct extraction could legally stabilize on for
/// this scenario: its restriction to the correct processes must match the
/// truth graph exactly on nodes and carry no edge the truth lacks, and
/// whatever the restriction removed must sit strictly downstream (no edge
/// from a removed node back into the kept part).
pub fn brute_force_extraction_oracle(
    scenario: &Scenario,
    family: &GraphFamily,
) -> Vec<TimelinessGraph> {
    let correct: BTreeSet<u32> = scenario.correct().iter().map(|p| p.0).collect();
    let truth_nodes: BTreeSet<u32> = scenario.truth.nodes().iter().map(|p| p.0).collect();
    let truth_edges: BTreeSet<(u32, u32)> = scenario
        .truth
        .edges()
        .iter()
        .map(|&(a, b)| (a.0, b.0))
        .collect();
    family
        .members()
        .iter()
        .filter(|g| admissible(g, &correct, &truth_nodes, &truth_edges))
        .cloned()
        .collect()
}

fn admissible(
    g: &TimelinessGraph,
    correct: &BTreeSet<u32>,
    truth_nodes: &BTreeSet<u32>,
    truth_edges: &BTreeSet<(u32, u32)>,
) -> bool {
    let nodes: BTreeSet<u32> = g.nodes().iter().map(|p| p.0).collect();
    let edges: BTreeSet<(u32, u32)> = g.edges().iter().map(|&(a, b)| (a.0, b.0)).collect();

    // Restrict to the correct processes.
    let kept: BTreeSet<u32> = nodes.intersection(correct).copied().collect();
    let kept_edges: BTreeSet<(u32, u32)> = edges
        .iter()
        .filter(|(a, b)| kept.contains(a) && kept.contains(b))
        .copied()
        .collect();

    // The restriction must cover the truth graph's nodes exactly and claim
    // no timely link the truth does not have.
    if kept != *truth_nodes || !kept_edges.is_subset(truth_edges) {
        return false;
    }

    // Either the restriction removed nothing, or no removed node points back
    // into the kept part.
    nodes == kept
        || !edges
            .iter()
            .any(|(a, b)| !kept.contains(a) && kept.contains(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{FamilyTag, ProcessId};

    fn graph(nodes: &[u32], edges: &[(u32, u32)]) -> TimelinessGraph {
        TimelinessGraph::new(
            nodes.iter().copied().map(ProcessId),
            edges.iter().map(|&(a, b)| (ProcessId(a), ProcessId(b))),
        )
        .unwrap()
    }

    #[test]
    fn all_correct_ring_truth_pins_exactly_that_cycle() {
        let truth = graph(&[0, 1, 2], &[(0, 1), (1, 2), (2, 0)]);
        let scenario = Scenario::minimal(3, FamilyTag::Ring, truth.clone());
        let family = scenario.build_family().unwrap();
        let oracle = brute_force_extraction_oracle(&scenario, &family);
        assert_eq!(oracle, vec![truth]);
    }

    #[test]
    fn star_with_a_crash_keeps_only_members_whose_extras_point_away() {
        // Process 2 crashes; the truth star is 0 -> 1. A member may retain
        // the crashed leaf 2 only on an edge leaving the kept part, so the
        // star centered at 2 (whose edges point back in) must be rejected.
        let truth = graph(&[0, 1], &[(0, 1)]);
        let mut scenario = Scenario::minimal(3, FamilyTag::Star, truth);
        scenario.crashes.insert(ProcessId(2), 20);
        let family = scenario.build_family().unwrap();
        let oracle = brute_force_extraction_oracle(&scenario, &family);
        assert_eq!(
            oracle,
            vec![
                graph(&[0, 1], &[(0, 1)]),
                graph(&[0, 1, 2], &[(0, 1), (0, 2)]),
            ]
        );
    }

    #[test]
    fn truth_admitting_no_member_yields_an_empty_oracle() {
        // No strongly connected graph fits inside an acyclic truth graph.
        let truth = graph(&[0, 1, 2], &[(0, 1), (1, 2)]);
        let scenario = Scenario::minimal(3, FamilyTag::Sc, truth);
        let family = scenario.build_family().unwrap();
        let oracle = brute_force_extraction_oracle(&scenario, &family);
        assert!(oracle.is_empty());
    }
}
