//! The general extraction algorithm: every process blames family members
//! that contradict what it observes (missing itself, or carrying a link that
//! missed its delivery estimate), and all processes select the least-blamed
//! member under the lexicographic order on (accusation count, member).

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graphs::{GraphFamily, ProcessId, TimelinessGraph};
use crate::protocol::{
    CounterKind, ExtractionProtocol, MemberIdx, Outbox, Payload, ProtocolContext,
};

pub struct BasicProtocol {
    me: ProcessId,
    n: u32,
    family: Arc<GraphFamily>,
    /// Accusation counter per member, indexed like the family's member list.
    acc: Vec<u64>,
    /// Per-incoming-link delivery estimate Δ[q]; grows by one on every
    /// expiry, so it eventually exceeds any bounded delivery gap.
    delta_est: BTreeMap<ProcessId, u64>,
    /// Cached index of the current output: the member minimizing (acc, idx).
    current: MemberIdx,
    /// For each process id, the members that do not contain it.
    missing_index: Vec<Vec<MemberIdx>>,
    /// For each edge appearing in any member, the members carrying it.
    edge_index: BTreeMap<(ProcessId, ProcessId), Vec<MemberIdx>>,

    /// Exact-mode extension (the `basic-exact` registry entry): restrict
    /// selection to members whose node set equals the processes currently
    /// not suspected. The adversary-schedule suite uses this variant to
    /// exhibit why claiming exactness is untenable for non-strongly-connected
    /// families; `suspected` stays empty in standard mode.
    exact_mode: bool,
    suspected: BTreeSet<ProcessId>,
    /// Node set → members with exactly that node set (exact mode only).
    node_set_index: BTreeMap<Vec<ProcessId>, Vec<MemberIdx>>,
}

impl BasicProtocol {
    pub fn new(ctx: &ProtocolContext, exact_mode: bool) -> Result<Self> {
        if ctx.family.is_empty() {
            return Err(Error::Config("family has no members".into()));
        }
        let members = ctx.family.members();
        let mut missing_index = vec![Vec::new(); ctx.n as usize];
        let mut edge_index: BTreeMap<(ProcessId, ProcessId), Vec<MemberIdx>> = BTreeMap::new();
        let mut node_set_index: BTreeMap<Vec<ProcessId>, Vec<MemberIdx>> = BTreeMap::new();
        for (idx, m) in members.iter().enumerate() {
            for id in 0..ctx.n {
                if !m.contains_node(ProcessId(id)) {
                    missing_index[id as usize].push(idx);
                }
            }
            for &edge in m.edges() {
                edge_index.entry(edge).or_default().push(idx);
            }
            if exact_mode {
                node_set_index
                    .entry(m.nodes().to_vec())
                    .or_default()
                    .push(idx);
            }
        }
        Ok(Self {
            me: ctx.me,
            n: ctx.n,
            family: Arc::clone(&ctx.family),
            acc: vec![0; members.len()],
            delta_est: BTreeMap::new(),
            current: 0,
            missing_index,
            edge_index,
            exact_mode,
            suspected: BTreeSet::new(),
            node_set_index,
        })
    }

    fn peers(&self) -> impl Iterator<Item = ProcessId> + '_ {
        (0..self.n).map(ProcessId).filter(move |&q| q != self.me)
    }

    /// Full argmin over (acc, idx); restricted to `pool` when given.
    fn argmin(&self, pool: Option<&[MemberIdx]>) -> MemberIdx {
        let best = |candidates: &mut dyn Iterator<Item = MemberIdx>| {
            candidates.min_by_key(|&x| (self.acc[x], x))
        };
        match pool {
            Some(p) if !p.is_empty() => best(&mut p.iter().copied()).unwrap(),
            _ => best(&mut (0..self.acc.len())).unwrap(),
        }
    }

    fn reselect(&mut self) {
        if self.exact_mode {
            let believed: Vec<ProcessId> = (0..self.n)
                .map(ProcessId)
                .filter(|p| !self.suspected.contains(p))
                .collect();
            // Prefer members matching the believed-correct node set exactly;
            // fall back to the unrestricted minimum when none exists.
            self.current = self.argmin(self.node_set_index.get(&believed).map(Vec::as_slice));
        } else {
            self.current = self.argmin(None);
        }
    }

    /// Increments the counters of `members`, records the bumps, and rescans
    /// the argmin only when the cached winner was touched (counters only
    /// grow, so other bumps cannot create a new minimum).
    fn blame(&mut self, members: &[MemberIdx], out: &mut Outbox) {
        let mut touched_current = false;
        for &x in members {
            self.acc[x] += 1;
            out.bump(x, CounterKind::Acc, self.acc[x]);
            touched_current |= x == self.current;
        }
        if self.exact_mode || touched_current {
            self.reselect();
        }
    }

    /// Accusation counter of member `x` (inspection hook for tests).
    pub fn accusation(&self, x: MemberIdx) -> u64 {
        self.acc[x]
    }

    pub fn current_member(&self) -> MemberIdx {
        self.current
    }

    pub fn delta_estimate(&self, q: ProcessId) -> Option<u64> {
        self.delta_est.get(&q).copied()
    }

    pub fn suspected(&self) -> &BTreeSet<ProcessId> {
        &self.suspected
    }
}

impl ExtractionProtocol for BasicProtocol {
    fn on_init(&mut self, out: &mut Outbox) {
        for q in self.peers().collect::<Vec<_>>() {
            self.delta_est.insert(q, 1);
            out.set_timer(q, 1);
        }
        self.reselect();
    }

    fn on_periodic(&mut self, out: &mut Outbox) {
        for q in self.peers().collect::<Vec<_>>() {
            out.send(q, Payload::Alive);
        }
        out.rbcast(Payload::BasicAcc {
            link_from: None,
            accuser: self.me,
        });
    }

    fn on_deliver(&mut self, from: ProcessId, payload: &Payload, _out: &mut Outbox) {
        match payload {
            Payload::Alive => {
                let d = self.delta_est[&from];
                _out.set_timer(from, d);
                if self.exact_mode && self.suspected.remove(&from) {
                    self.reselect();
                }
            }
            other => debug_assert!(false, "unexpected point-to-point payload {other:?}"),
        }
    }

    fn on_rb_deliver(&mut self, _from: ProcessId, payload: &Payload, out: &mut Outbox) {
        match payload {
            Payload::BasicAcc { link_from, accuser } => {
                let affected: Vec<MemberIdx> = match link_from {
                    None => self.missing_index[accuser.0 as usize].clone(),
                    Some(q) => self
                        .edge_index
                        .get(&(*q, *accuser))
                        .cloned()
                        .unwrap_or_default(),
                };
                self.blame(&affected, out);
            }
            other => debug_assert!(false, "unexpected broadcast payload {other:?}"),
        }
    }

    fn on_timer_expire(&mut self, peer: ProcessId, out: &mut Outbox) {
        out.rbcast(Payload::BasicAcc {
            link_from: Some(peer),
            accuser: self.me,
        });
        let d = self.delta_est.get_mut(&peer).expect("timer for known peer");
        *d += 1;
        let d = *d;
        out.set_timer(peer, d);
        if self.exact_mode && self.suspected.insert(peer) {
            self.reselect();
        }
    }

    fn output(&self) -> Option<&TimelinessGraph> {
        Some(self.family.member(self.current))
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
