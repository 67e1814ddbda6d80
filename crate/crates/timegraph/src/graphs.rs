//! Timeliness graphs, dicut reductions, and the named graph families.
//!
//! A timeliness graph records, for a set of processes, which directed links
//! between them are considered timely. Graphs are kept in canonical form
//! (sorted node list, sorted edge list) so that equality, ordering, and the
//! text form are all bit-stable.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest process count the explicit family enumerators and dicut
/// enumeration accept.
pub const ENUMERATION_CAP: u32 = 5;

/// Identifier of a process; ids are dense in `[0, n)` for an n-process system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(pub u32);

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A directed graph over a subset of processes. Nodes and edges are sorted,
/// deduplicated, and every edge endpoint is a node; self-loops are rejected.
///
/// The derived ordering (node list first, then edge list, both
/// lexicographically) is the total order used everywhere a "least graph" is
/// selected.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimelinessGraph {
    nodes: Vec<ProcessId>,
    edges: Vec<(ProcessId, ProcessId)>,
}

impl TimelinessGraph {
    /// Builds a graph from node and edge lists, canonicalizing order and
    /// rejecting dangling endpoints and self-loops.
    pub fn new(
        nodes: impl IntoIterator<Item = ProcessId>,
        edges: impl IntoIterator<Item = (ProcessId, ProcessId)>,
    ) -> Result<Self> {
        let node_set: BTreeSet<ProcessId> = nodes.into_iter().collect();
        let edge_set: BTreeSet<(ProcessId, ProcessId)> = edges.into_iter().collect();
        for &(a, b) in &edge_set {
            if a == b {
                return Err(Error::Structure(format!("self-loop on process {a}")));
            }
            if !node_set.contains(&a) || !node_set.contains(&b) {
                return Err(Error::Structure(format!(
                    "edge ({a},{b}) has an endpoint outside the node list"
                )));
            }
        }
        Ok(Self {
            nodes: node_set.into_iter().collect(),
            edges: edge_set.into_iter().collect(),
        })
    }

    /// Builds without validation; callers must supply sorted, deduplicated,
    /// endpoint-closed input (used by the enumerators below).
    fn from_canonical(nodes: Vec<ProcessId>, edges: Vec<(ProcessId, ProcessId)>) -> Self {
        debug_assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        Self { nodes, edges }
    }

    pub fn nodes(&self) -> &[ProcessId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(ProcessId, ProcessId)] {
        &self.edges
    }

    pub fn node_set(&self) -> BTreeSet<ProcessId> {
        self.nodes.iter().copied().collect()
    }

    pub fn contains_node(&self, p: ProcessId) -> bool {
        self.nodes.binary_search(&p).is_ok()
    }

    pub fn contains_edge(&self, from: ProcessId, to: ProcessId) -> bool {
        self.edges.binary_search(&(from, to)).is_ok()
    }

    /// The subgraph induced by `keep`: nodes in the intersection, edges with
    /// both endpoints kept.
    pub fn induced(&self, keep: &BTreeSet<ProcessId>) -> Self {
        let nodes: Vec<ProcessId> = self
            .nodes
            .iter()
            .copied()
            .filter(|p| keep.contains(p))
            .collect();
        let edges: Vec<(ProcessId, ProcessId)> = self
            .edges
            .iter()
            .copied()
            .filter(|(a, b)| keep.contains(a) && keep.contains(b))
            .collect();
        Self::from_canonical(nodes, edges)
    }

    fn local_index(&self, p: ProcessId) -> usize {
        self.nodes.binary_search(&p).expect("node present")
    }

    /// Bitmask of nodes reachable from `start` (local indices), following
    /// edges forward or backward.
    fn reach_mask(&self, start: usize, backward: bool) -> u64 {
        let mut seen: u64 = 1 << start;
        let mut frontier = vec![start];
        while let Some(i) = frontier.pop() {
            let here = self.nodes[i];
            for &(a, b) in &self.edges {
                let (src, dst) = if backward { (b, a) } else { (a, b) };
                if src == here {
                    let j = self.local_index(dst);
                    if seen & (1 << j) == 0 {
                        seen |= 1 << j;
                        frontier.push(j);
                    }
                }
            }
        }
        seen
    }

    pub fn is_strongly_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let full: u64 = if self.nodes.len() == 64 {
            u64::MAX
        } else {
            (1 << self.nodes.len()) - 1
        };
        self.reach_mask(0, false) == full && self.reach_mask(0, true) == full
    }

    /// The smallest node from which every node is reachable, if any.
    pub fn root(&self) -> Option<ProcessId> {
        let full: u64 = if self.nodes.is_empty() {
            return None;
        } else {
            (1 << self.nodes.len()) - 1
        };
        (0..self.nodes.len())
            .find(|&i| self.reach_mask(i, false) == full)
            .map(|i| self.nodes[i])
    }
}

/// Total order over graphs: node lists compared lexicographically, then edge
/// lists. Exposed as a function for call sites that read better with one.
pub fn graph_order(a: &TimelinessGraph, b: &TimelinessGraph) -> Ordering {
    a.cmp(b)
}

/// `a` is compatible with `b` when they have the same nodes and every edge of
/// `a` is an edge of `b`.
pub fn is_compatible(a: &TimelinessGraph, b: &TimelinessGraph) -> bool {
    a.nodes == b.nodes && a.edges.iter().all(|&(x, y)| b.contains_edge(x, y))
}

impl fmt::Display for TimelinessGraph {
    /// Canonical text form, e.g. `nodes:[0,1,2];edges:[(1,2),(2,1)]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "nodes:[")?;
        for (i, p) in self.nodes.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "];edges:[")?;
        for (i, (a, b)) in self.edges.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "({a},{b})")?;
        }
        write!(f, "]")
    }
}

impl FromStr for TimelinessGraph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |what: &str| Error::Parse(format!("graph text {s:?}: {what}"));
        let rest = s
            .strip_prefix("nodes:[")
            .ok_or_else(|| bad("expected `nodes:[`"))?;
        let (node_part, rest) = rest
            .split_once("];edges:[")
            .ok_or_else(|| bad("expected `];edges:[`"))?;
        let edge_part = rest
            .strip_suffix(']')
            .ok_or_else(|| bad("expected trailing `]`"))?;

        let mut nodes = Vec::new();
        if !node_part.is_empty() {
            for tok in node_part.split(',') {
                let id: u32 = tok.parse().map_err(|_| bad("bad node id"))?;
                nodes.push(ProcessId(id));
            }
        }
        let mut edges = Vec::new();
        if !edge_part.is_empty() {
            let mut cursor = edge_part;
            while !cursor.is_empty() {
                let inner = cursor
                    .strip_prefix('(')
                    .ok_or_else(|| bad("expected `(`"))?;
                let (pair, tail) = inner.split_once(')').ok_or_else(|| bad("expected `)`"))?;
                let (a, b) = pair
                    .split_once(',')
                    .ok_or_else(|| bad("expected `a,b` pair"))?;
                let a: u32 = a.parse().map_err(|_| bad("bad edge endpoint"))?;
                let b: u32 = b.parse().map_err(|_| bad("bad edge endpoint"))?;
                edges.push((ProcessId(a), ProcessId(b)));
                cursor = match tail.strip_prefix(',') {
                    Some(t) => t,
                    None if tail.is_empty() => tail,
                    None => return Err(bad("expected `,` between edges")),
                };
            }
        }
        Self::new(nodes, edges)
    }
}

impl Serialize for TimelinessGraph {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TimelinessGraph {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// A partition of a graph's nodes into `(x_side, y_side)`. It is a dicut when
/// no edge runs from the Y side into the X side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dicut {
    pub x_side: BTreeSet<ProcessId>,
    pub y_side: BTreeSet<ProcessId>,
}

/// Whether `d` is a dicut of `g`. The two sides must partition `Node(g)`
/// exactly; either side may be empty.
pub fn is_dicut(g: &TimelinessGraph, d: &Dicut) -> Result<bool> {
    if !d.x_side.is_disjoint(&d.y_side) {
        return Err(Error::Structure("dicut sides overlap".into()));
    }
    let union: BTreeSet<ProcessId> = d.x_side.union(&d.y_side).copied().collect();
    if union != g.node_set() {
        return Err(Error::Structure(
            "dicut sides do not partition the node set".into(),
        ));
    }
    Ok(g.edges()
        .iter()
        .all(|(a, b)| !(d.y_side.contains(a) && d.x_side.contains(b))))
}

/// All graphs obtained by restricting `g` to the X side of a dicut with both
/// sides nonempty, sorted and deduplicated.
pub fn dicut_reductions(g: &TimelinessGraph) -> Result<Vec<TimelinessGraph>> {
    let k = g.nodes().len();
    if k as u32 > ENUMERATION_CAP {
        return Err(Error::Capacity(format!(
            "dicut enumeration supports at most {ENUMERATION_CAP} nodes, got {k}"
        )));
    }
    let mut out = BTreeSet::new();
    for mask in 1u32..((1 << k) - 1).max(1) {
        if k < 2 {
            break;
        }
        let x_side: BTreeSet<ProcessId> = (0..k)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| g.nodes()[i])
            .collect();
        let crossing = g
            .edges()
            .iter()
            .any(|(a, b)| !x_side.contains(a) && x_side.contains(b));
        if !crossing {
            out.insert(g.induced(&x_side));
        }
    }
    Ok(out.into_iter().collect())
}

/// Names of the built-in graph families, plus `Custom` for explicit member
/// lists loaded from scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FamilyTag {
    #[serde(rename = "ASYNC")]
    Async,
    #[serde(rename = "COMPLETE")]
    Complete,
    #[serde(rename = "STAR")]
    Star,
    #[serde(rename = "TREE")]
    Tree,
    #[serde(rename = "RING")]
    Ring,
    #[serde(rename = "SC")]
    Sc,
    #[serde(rename = "BIC")]
    Bic,
    #[serde(rename = "PAIR")]
    Pair,
    #[serde(rename = "CUSTOM")]
    Custom,
}

impl FamilyTag {
    pub const NAMED: [FamilyTag; 8] = [
        FamilyTag::Async,
        FamilyTag::Complete,
        FamilyTag::Star,
        FamilyTag::Tree,
        FamilyTag::Ring,
        FamilyTag::Sc,
        FamilyTag::Bic,
        FamilyTag::Pair,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyTag::Async => "ASYNC",
            FamilyTag::Complete => "COMPLETE",
            FamilyTag::Star => "STAR",
            FamilyTag::Tree => "TREE",
            FamilyTag::Ring => "RING",
            FamilyTag::Sc => "SC",
            FamilyTag::Bic => "BIC",
            FamilyTag::Pair => "PAIR",
            FamilyTag::Custom => "CUSTOM",
        }
    }
}

impl fmt::Display for FamilyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ASYNC" => Ok(FamilyTag::Async),
            "COMPLETE" => Ok(FamilyTag::Complete),
            "STAR" => Ok(FamilyTag::Star),
            "TREE" => Ok(FamilyTag::Tree),
            "RING" => Ok(FamilyTag::Ring),
            "SC" => Ok(FamilyTag::Sc),
            "BIC" => Ok(FamilyTag::Bic),
            "PAIR" => Ok(FamilyTag::Pair),
            "CUSTOM" => Ok(FamilyTag::Custom),
            other => Err(Error::Parse(format!("unknown family {other:?}"))),
        }
    }
}

/// Evidence that a family is not dicut-closed: `member` restricted to
/// `x_side` yields `reduced`, which is not itself a member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureWitness {
    pub member: TimelinessGraph,
    pub x_side: BTreeSet<ProcessId>,
    pub reduced: TimelinessGraph,
}

/// A finite family of timeliness graphs over processes `0..n`, sorted by
/// `graph_order` with no duplicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphFamily {
    tag: FamilyTag,
    n: u32,
    members: Vec<TimelinessGraph>,
}

impl GraphFamily {
    /// Enumerates a named family over processes `0..n`.
    pub fn generate(tag: FamilyTag, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("family universe must have n >= 1".into()));
        }
        if n > ENUMERATION_CAP {
            return Err(Error::Capacity(format!(
                "family enumeration supports at most n = {ENUMERATION_CAP}, got {n}"
            )));
        }
        if tag == FamilyTag::Custom {
            return Err(Error::Config(
                "CUSTOM families need an explicit member list".into(),
            ));
        }
        let mut members = BTreeSet::new();
        for mask in 1u32..(1 << n) {
            let subset: Vec<ProcessId> = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(ProcessId)
                .collect();
            enumerate_on_subset(tag, &subset, &mut members);
        }
        Ok(Self {
            tag,
            n,
            members: members.into_iter().collect(),
        })
    }

    /// Wraps an explicit member list as a `CUSTOM` family.
    pub fn custom(n: u32, members: impl IntoIterator<Item = TimelinessGraph>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("family universe must have n >= 1".into()));
        }
        let set: BTreeSet<TimelinessGraph> = members.into_iter().collect();
        if set.is_empty() {
            return Err(Error::Config("a family needs at least one member".into()));
        }
        for g in &set {
            if let Some(p) = g.nodes().iter().find(|p| p.0 >= n) {
                return Err(Error::Config(format!(
                    "member {g} mentions process {p}, outside universe 0..{n}"
                )));
            }
        }
        Ok(Self {
            tag: FamilyTag::Custom,
            n,
            members: set.into_iter().collect(),
        })
    }

    pub fn tag(&self) -> FamilyTag {
        self.tag
    }

    pub fn universe(&self) -> u32 {
        self.n
    }

    pub fn members(&self) -> &[TimelinessGraph] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, idx: usize) -> &TimelinessGraph {
        &self.members[idx]
    }

    pub fn index_of(&self, g: &TimelinessGraph) -> Option<usize> {
        self.members.binary_search(g).ok()
    }

    pub fn contains(&self, g: &TimelinessGraph) -> bool {
        self.index_of(g).is_some()
    }

    /// Whether every dicut reduction of every member is itself a member.
    /// On failure, returns the first counterexample in enumeration order
    /// (members ascending, X-side bitmasks ascending).
    pub fn is_dicut_closed(&self) -> (bool, Option<ClosureWitness>) {
        for member in &self.members {
            let k = member.nodes().len();
            if k < 2 {
                continue;
            }
            for mask in 1u32..(1 << k) - 1 {
                let x_side: BTreeSet<ProcessId> = (0..k)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| member.nodes()[i])
                    .collect();
                let crossing = member
                    .edges()
                    .iter()
                    .any(|(a, b)| !x_side.contains(a) && x_side.contains(b));
                if crossing {
                    continue;
                }
                let reduced = member.induced(&x_side);
                if !self.contains(&reduced) {
                    return (
                        false,
                        Some(ClosureWitness {
                            member: member.clone(),
                            x_side,
                            reduced,
                        }),
                    );
                }
            }
        }
        (true, None)
    }
}

/// Adds every member of `tag` whose node set is exactly `subset`.
fn enumerate_on_subset(tag: FamilyTag, subset: &[ProcessId], out: &mut BTreeSet<TimelinessGraph>) {
    let k = subset.len();
    match tag {
        FamilyTag::Async => {
            out.insert(TimelinessGraph::from_canonical(subset.to_vec(), Vec::new()));
        }
        FamilyTag::Complete => {
            let mut edges = Vec::new();
            for &a in subset {
                for &b in subset {
                    if a != b {
                        edges.push((a, b));
                    }
                }
            }
            edges.sort_unstable();
            out.insert(TimelinessGraph::from_canonical(subset.to_vec(), edges));
        }
        FamilyTag::Star => {
            for &center in subset {
                let mut edges: Vec<_> = subset
                    .iter()
                    .copied()
                    .filter(|&q| q != center)
                    .map(|q| (center, q))
                    .collect();
                edges.sort_unstable();
                out.insert(TimelinessGraph::from_canonical(subset.to_vec(), edges));
            }
        }
        FamilyTag::Tree => {
            // All edge sets of size k-1 whose edges are covered by a root's
            // reachability; with exactly k-1 edges that forces in-degree one
            // per non-root, i.e. a directed tree pointing away from the root.
            if k == 1 {
                out.insert(TimelinessGraph::from_canonical(subset.to_vec(), Vec::new()));
                return;
            }
            let pairs = ordered_pairs(subset);
            for combo in combinations(pairs.len(), k - 1) {
                let edges: Vec<_> = combo.iter().map(|&i| pairs[i]).collect();
                let g = TimelinessGraph::from_canonical(subset.to_vec(), sorted(edges));
                if g.root().is_some() {
                    out.insert(g);
                }
            }
        }
        FamilyTag::Ring => {
            // Directed cycles covering the subset; two-node members are the
            // smallest rings. Fix the first element to quotient out rotations.
            if k < 2 {
                return;
            }
            let first = subset[0];
            let rest: Vec<ProcessId> = subset[1..].to_vec();
            for perm in permutations(&rest) {
                let mut cycle = vec![first];
                cycle.extend(perm);
                let mut edges: Vec<_> = cycle
                    .windows(2)
                    .map(|w| (w[0], w[1]))
                    .chain(std::iter::once((cycle[k - 1], cycle[0])))
                    .collect();
                edges.sort_unstable();
                edges.dedup();
                out.insert(TimelinessGraph::from_canonical(subset.to_vec(), edges));
            }
        }
        FamilyTag::Sc => {
            for g in all_digraphs(subset) {
                if g.is_strongly_connected() {
                    out.insert(g);
                }
            }
        }
        FamilyTag::Bic => {
            // Strongly connected and still strongly connected after deleting
            // any single node; meaningful from three nodes up.
            if k < 3 {
                return;
            }
            for g in all_digraphs(subset) {
                if !g.is_strongly_connected() {
                    continue;
                }
                let robust = subset.iter().all(|&v| {
                    let keep: BTreeSet<ProcessId> =
                        subset.iter().copied().filter(|&q| q != v).collect();
                    g.induced(&keep).is_strongly_connected()
                });
                if robust {
                    out.insert(g);
                }
            }
        }
        FamilyTag::Pair => {
            for i in 0..k {
                for j in (i + 1)..k {
                    let (a, b) = (subset[i], subset[j]);
                    out.insert(TimelinessGraph::from_canonical(
                        subset.to_vec(),
                        sorted(vec![(a, b), (b, a)]),
                    ));
                }
            }
        }
        FamilyTag::Custom => unreachable!("custom families are not enumerated"),
    }
}

fn sorted(mut edges: Vec<(ProcessId, ProcessId)>) -> Vec<(ProcessId, ProcessId)> {
    edges.sort_unstable();
    edges
}

fn ordered_pairs(subset: &[ProcessId]) -> Vec<(ProcessId, ProcessId)> {
    let mut pairs = Vec::new();
    for &a in subset {
        for &b in subset {
            if a != b {
                pairs.push((a, b));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// All `choose`-element index subsets of `0..len`, ascending.
fn combinations(len: usize, choose: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn rec(
        start: usize,
        len: usize,
        left: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if left == 0 {
            out.push(current.clone());
            return;
        }
        for i in start..=len.saturating_sub(left) {
            current.push(i);
            rec(i + 1, len, left - 1, current, out);
            current.pop();
        }
    }
    rec(0, len, choose, &mut current, &mut out);
    out
}

fn permutations(items: &[ProcessId]) -> Vec<Vec<ProcessId>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &head) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Every digraph (no self-loops) on exactly `subset`.
fn all_digraphs(subset: &[ProcessId]) -> Vec<TimelinessGraph> {
    let pairs = ordered_pairs(subset);
    let m = pairs.len();
    let mut out = Vec::with_capacity(1 << m);
    for mask in 0u32..(1 << m) {
        let edges: Vec<_> = (0..m)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| pairs[i])
            .collect();
        out.push(TimelinessGraph::from_canonical(
            subset.to_vec(),
            sorted(edges),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(text: &str) -> TimelinessGraph {
        text.parse().expect("test graph parses")
    }

    fn pid_set(ids: &[u32]) -> BTreeSet<ProcessId> {
        ids.iter().copied().map(ProcessId).collect()
    }

    #[test]
    fn text_form_is_exact() {
        let graph = TimelinessGraph::new(
            [ProcessId(2), ProcessId(0), ProcessId(1)],
            [(ProcessId(2), ProcessId(1)), (ProcessId(1), ProcessId(2))],
        )
        .unwrap();
        assert_eq!(graph.to_string(), "nodes:[0,1,2];edges:[(1,2),(2,1)]");
        assert_eq!(g("nodes:[0,1,2];edges:[(1,2),(2,1)]"), graph);
        assert_eq!(g("nodes:[];edges:[]").to_string(), "nodes:[];edges:[]");
    }

    #[test]
    fn construction_rejects_bad_edges() {
        let dangling = TimelinessGraph::new([ProcessId(0)], [(ProcessId(0), ProcessId(1))]);
        assert!(matches!(dangling, Err(Error::Structure(_))));
        let loopy = TimelinessGraph::new([ProcessId(0)], [(ProcessId(0), ProcessId(0))]);
        assert!(matches!(loopy, Err(Error::Structure(_))));
        assert!(matches!(
            "nodes:[0;edges:[]".parse::<TimelinessGraph>(),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn induced_keeps_internal_edges_only() {
        let ring = g("nodes:[0,1,2];edges:[(0,1),(1,2),(2,0)]");
        assert_eq!(
            ring.induced(&pid_set(&[0, 1])),
            g("nodes:[0,1];edges:[(0,1)]")
        );
        assert_eq!(ring.induced(&pid_set(&[7])), g("nodes:[];edges:[]"));
    }

    #[test]
    fn dicut_checks_direction_and_partition() {
        let ring = g("nodes:[0,1,2];edges:[(0,1),(1,2),(2,0)]");
        // Edge (2,0) runs from the Y side into X = {0}.
        let d = Dicut {
            x_side: pid_set(&[0]),
            y_side: pid_set(&[1, 2]),
        };
        assert!(!is_dicut(&ring, &d).unwrap());

        let two_cycle = g("nodes:[0,1,2];edges:[(1,2),(2,1)]");
        assert!(is_dicut(
            &two_cycle,
            &Dicut {
                x_side: pid_set(&[0]),
                y_side: pid_set(&[1, 2]),
            }
        )
        .unwrap());
        // Empty side is allowed for the predicate itself.
        assert!(is_dicut(
            &two_cycle,
            &Dicut {
                x_side: pid_set(&[0, 1, 2]),
                y_side: pid_set(&[]),
            }
        )
        .unwrap());

        let not_partition = Dicut {
            x_side: pid_set(&[0]),
            y_side: pid_set(&[1]),
        };
        assert!(matches!(
            is_dicut(&two_cycle, &not_partition),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn dicut_reductions_enumerate_both_sides_nonempty() {
        // Hand enumeration for nodes {0,1,2}, edges {(1,2),(2,1)}: of the six
        // proper bipartitions only X={0} and X={1,2} have no Y-to-X edge.
        let two_cycle = g("nodes:[0,1,2];edges:[(1,2),(2,1)]");
        let reductions = dicut_reductions(&two_cycle).unwrap();
        assert_eq!(
            reductions,
            vec![
                g("nodes:[0];edges:[]"),
                g("nodes:[1,2];edges:[(1,2),(2,1)]")
            ]
        );

        // Strongly connected graphs admit no dicut with both sides nonempty.
        let ring = g("nodes:[0,1,2];edges:[(0,1),(1,2),(2,0)]");
        assert!(dicut_reductions(&ring).unwrap().is_empty());

        let big = TimelinessGraph::new((0..6).map(ProcessId), []).unwrap();
        assert!(matches!(dicut_reductions(&big), Err(Error::Capacity(_))));
    }

    #[test]
    fn graph_order_examples() {
        assert_eq!(
            graph_order(&g("nodes:[0];edges:[]"), &g("nodes:[0,1];edges:[]")),
            Ordering::Less
        );
        assert_eq!(
            graph_order(
                &g("nodes:[0,1];edges:[(0,1)]"),
                &g("nodes:[0,1];edges:[(1,0)]")
            ),
            Ordering::Less
        );
    }

    /// Every graph on nodes drawn from {0,1,2}: 3 singletons, 3*4 two-node
    /// graphs, 64 three-node graphs.
    fn all_small_graphs() -> Vec<TimelinessGraph> {
        let mut out = Vec::new();
        for mask in 1u32..8 {
            let subset: Vec<ProcessId> = (0..3)
                .filter(|i| mask & (1 << i) != 0)
                .map(ProcessId)
                .collect();
            out.extend(all_digraphs(&subset));
        }
        assert_eq!(out.len(), 3 + 12 + 64);
        out
    }

    #[test]
    fn graph_order_is_total() {
        let graphs = all_small_graphs();
        for a in &graphs {
            assert_eq!(graph_order(a, a), Ordering::Equal);
            for b in &graphs {
                let ab = graph_order(a, b);
                assert_eq!(ab.reverse(), graph_order(b, a));
                if ab == Ordering::Equal {
                    assert_eq!(a, b);
                }
                for c in &graphs {
                    if ab == Ordering::Less && graph_order(b, c) == Ordering::Less {
                        assert_eq!(graph_order(a, c), Ordering::Less);
                    }
                }
            }
        }
    }

    #[test]
    fn compatibility_requires_equal_nodes_and_edge_subset() {
        let sub = g("nodes:[0,1];edges:[(0,1)]");
        let sup = g("nodes:[0,1];edges:[(0,1),(1,0)]");
        assert!(is_compatible(&sub, &sup));
        assert!(!is_compatible(&sup, &sub));
        assert!(!is_compatible(&sub, &g("nodes:[0,1,2];edges:[(0,1)]")));
    }

    #[test]
    fn async_family_is_every_edgeless_subset() {
        let family = GraphFamily::generate(FamilyTag::Async, 2).unwrap();
        assert_eq!(
            family.members(),
            &[
                g("nodes:[0];edges:[]"),
                g("nodes:[0,1];edges:[]"),
                g("nodes:[1];edges:[]"),
            ]
        );
    }

    #[test]
    fn ring_family_members_for_three_processes() {
        let family = GraphFamily::generate(FamilyTag::Ring, 3).unwrap();
        let expected = vec![
            g("nodes:[0,1];edges:[(0,1),(1,0)]"),
            g("nodes:[0,1,2];edges:[(0,1),(1,2),(2,0)]"),
            g("nodes:[0,1,2];edges:[(0,2),(1,0),(2,1)]"),
            g("nodes:[0,2];edges:[(0,2),(2,0)]"),
            g("nodes:[1,2];edges:[(1,2),(2,1)]"),
        ];
        assert_eq!(family.members(), expected.as_slice());
    }

    #[test]
    fn family_sizes_match_counting_formulas() {
        // ASYNC/COMPLETE: one member per nonempty subset, 2^4 - 1.
        // STAR: one per (subset, center): sum over k of C(4,k)*k = 4+12+12+4.
        // TREE: rooted labeled trees, k^(k-1) per k-subset: 4+2*6+9*4+64.
        // RING: directed cycles, (k-1)! per k-subset from k=2: 6+8+6.
        // SC on 3 processes: 3 + 3 + 18 (strongly connected 3-node digraphs).
        // PAIR on 3: pair {a,b} times supersets: 3 pairs * 2 supersets.
        let count = |tag, n| GraphFamily::generate(tag, n).unwrap().len();
        assert_eq!(count(FamilyTag::Async, 4), 15);
        assert_eq!(count(FamilyTag::Complete, 4), 15);
        assert_eq!(count(FamilyTag::Star, 4), 32);
        assert_eq!(count(FamilyTag::Tree, 4), 116);
        assert_eq!(count(FamilyTag::Ring, 4), 20);
        assert_eq!(count(FamilyTag::Sc, 3), 24);
        assert_eq!(count(FamilyTag::Pair, 3), 6);
        // The only 3-node graph that stays strongly connected after any
        // single deletion is the complete one.
        let bic3 = GraphFamily::generate(FamilyTag::Bic, 3).unwrap();
        assert_eq!(
            bic3.members(),
            &[g(
                "nodes:[0,1,2];edges:[(0,1),(0,2),(1,0),(1,2),(2,0),(2,1)]"
            )]
        );
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        assert!(matches!(
            GraphFamily::generate(FamilyTag::Ring, 6),
            Err(Error::Capacity(_))
        ));
        assert!(matches!(
            GraphFamily::generate(FamilyTag::Ring, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn pair_family_is_not_dicut_closed() {
        let family = GraphFamily::generate(FamilyTag::Pair, 3).unwrap();
        let (closed, witness) = family.is_dicut_closed();
        assert!(!closed);
        let witness = witness.unwrap();
        // Whatever witness enumeration found first must be genuine.
        assert!(family.contains(&witness.member));
        let y_side: BTreeSet<ProcessId> = witness
            .member
            .node_set()
            .difference(&witness.x_side)
            .copied()
            .collect();
        assert!(is_dicut(
            &witness.member,
            &Dicut {
                x_side: witness.x_side.clone(),
                y_side,
            }
        )
        .unwrap());
        assert_eq!(witness.member.induced(&witness.x_side), witness.reduced);
        assert!(!family.contains(&witness.reduced));

        // The classical counterexample instance: the two-cycle on {1,2} with
        // bystander 0 reduces across the dicut ({0},{1,2}) to a singleton,
        // which is not a pair graph.
        let member = g("nodes:[0,1,2];edges:[(1,2),(2,1)]");
        assert!(family.contains(&member));
        assert!(is_dicut(
            &member,
            &Dicut {
                x_side: pid_set(&[0]),
                y_side: pid_set(&[1, 2]),
            }
        )
        .unwrap());
        assert!(!family.contains(&member.induced(&pid_set(&[0]))));
    }

    #[test]
    fn named_small_families_are_dicut_closed() {
        for tag in [
            FamilyTag::Async,
            FamilyTag::Complete,
            FamilyTag::Star,
            FamilyTag::Tree,
            FamilyTag::Ring,
            FamilyTag::Sc,
            FamilyTag::Bic,
        ] {
            let family = GraphFamily::generate(tag, 3).unwrap();
            let (closed, witness) = family.is_dicut_closed();
            assert!(closed, "{tag} not closed at n=3: {witness:?}");
        }
    }

    #[test]
    fn roots_of_stars_and_trees() {
        let star = g("nodes:[0,1,2];edges:[(1,0),(1,2)]");
        assert_eq!(star.root(), Some(ProcessId(1)));
        assert_eq!(g("nodes:[2];edges:[]").root(), Some(ProcessId(2)));
        assert_eq!(g("nodes:[0,1];edges:[]").root(), None);
        // Every node of a ring is a root; the smallest is reported.
        assert_eq!(
            g("nodes:[1,2,3];edges:[(1,2),(2,3),(3,1)]").root(),
            Some(ProcessId(1))
        );
        for member in GraphFamily::generate(FamilyTag::Star, 4).unwrap().members() {
            let root = member.root().expect("stars have a center");
            for &(a, _) in member.edges() {
                assert_eq!(a, root, "star edges all leave the center");
            }
        }
        for member in GraphFamily::generate(FamilyTag::Tree, 4).unwrap().members() {
            assert!(member.root().is_some());
            assert_eq!(member.edges().len(), member.nodes().len() - 1);
        }
    }

    #[test]
    fn custom_families_validate_universe() {
        let member = g("nodes:[0,5];edges:[]");
        assert!(matches!(
            GraphFamily::custom(3, [member]),
            Err(Error::Config(_))
        ));
        let family =
            GraphFamily::custom(3, [g("nodes:[1,2];edges:[(1,2)]"), g("nodes:[0];edges:[]")])
                .unwrap();
        assert_eq!(family.member(0), &g("nodes:[0];edges:[]"));
        assert_eq!(family.len(), 2);
    }

    proptest! {
        #[test]
        fn text_form_round_trips(node_mask in 1u32..32, edge_bits in 0u32.., seed in 0u64..1000) {
            let _ = seed;
            let subset: Vec<ProcessId> = (0..5).filter(|i| node_mask & (1 << i) != 0).map(ProcessId).collect();
            let pairs = ordered_pairs(&subset);
            let edges: Vec<_> = pairs
                .iter()
                .enumerate()
                .filter(|(i, _)| edge_bits & (1 << (i % 32)) != 0 && *i < 32)
                .map(|(_, &e)| e)
                .collect();
            let graph = TimelinessGraph::new(subset, edges).unwrap();
            let parsed: TimelinessGraph = graph.to_string().parse().unwrap();
            prop_assert_eq!(parsed, graph);
        }
    }
}
