//! Deterministic lock-step simulation of the protocol model: every live
//! process takes one atomic step per tick (deliveries, then timer expiries,
//! then the periodic task), links are reliable FIFO channels with seeded
//! random delays bounded by δ on timely links, reliable broadcast delivers
//! within a bound with an all-or-nothing contract for crashing senders, and
//! every run is a pure function of (scenario, algorithm, seed).

pub mod scenario;
pub mod trace;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graphs::{GraphFamily, ProcessId, TimelinessGraph};
use crate::protocol::{
    Action, CounterBump, CounterKind, ExtractionProtocol, Outbox, Payload, ProtocolContext,
    ProtocolRegistry, Tick,
};

pub use scenario::{DelayDirective, Scenario};
pub use trace::{EventKind, Trace, TraceEvent, TraceHeader};

/// A message in flight, queued at its delivery tick.
#[derive(Debug, Clone)]
struct Delivery {
    from: ProcessId,
    seq: u64,
    send_tick: Tick,
    payload: Payload,
    rb: bool,
}

/// Watches every counter write a protocol reports and records violations of
/// the never-decreases contract.
#[derive(Debug)]
pub struct MonotonicityMonitor {
    members: usize,
    last: Vec<Option<u64>>,
    violations: Vec<String>,
}

impl MonotonicityMonitor {
    fn new(n: u32, members: usize) -> Self {
        MonotonicityMonitor {
            members,
            last: vec![None; n as usize * members * 2],
            violations: Vec::new(),
        }
    }

    fn record(&mut self, p: ProcessId, bump: &CounterBump) {
        let kind_idx = match bump.kind {
            CounterKind::Acc => 0,
            CounterKind::Prop => 1,
        };
        let idx = (p.0 as usize * self.members + bump.member) * 2 + kind_idx;
        if let Some(prev) = self.last[idx] {
            if bump.value < prev {
                self.violations.push(format!(
                    "process {p}: {} counter of member {} went {prev} -> {}",
                    bump.kind, bump.member, bump.value
                ));
            }
        }
        self.last[idx] = Some(bump.value);
    }

    pub fn violations(&self) -> &[String] {
        &self.violations
    }
}

pub struct Simulation {
    scenario: Scenario,
    family: Arc<GraphFamily>,
    procs: Vec<Box<dyn ExtractionProtocol>>,
    crashed: Vec<bool>,
    rng: ChaCha8Rng,
    now: Tick,
    /// deliver tick → receiver → messages.
    inbox: BTreeMap<Tick, BTreeMap<ProcessId, Vec<Delivery>>>,
    /// Per process: peer → expiry tick of the armed timer.
    timers: Vec<BTreeMap<ProcessId, Tick>>,
    link_seq: BTreeMap<(ProcessId, ProcessId), u64>,
    /// Last delivery tick assigned per link; later sends never land earlier
    /// (FIFO, shared by point-to-point messages and broadcast legs).
    link_floor: BTreeMap<(ProcessId, ProcessId), Tick>,
    last_output: Vec<Option<TimelinessGraph>>,
    monitor: MonotonicityMonitor,
    trace: Trace,
}

impl Simulation {
    /// Validates the scenario, instantiates one protocol per process, and
    /// runs every initialization handler at tick 0, recording each
    /// process's starting output unconditionally.
    pub fn build(scenario: Scenario, algo: &str, registry: &ProtocolRegistry) -> Result<Self> {
        scenario.validate()?;
        let family = Arc::new(scenario.build_family()?);
        let digest = scenario.digest()?;
        let n = scenario.n;
        let mut procs = Vec::with_capacity(n as usize);
        for p in 0..n {
            let ctx = ProtocolContext {
                me: ProcessId(p),
                n,
                family: Arc::clone(&family),
                k_period: scenario.k_period,
            };
            procs.push(registry.create(algo, &ctx)?);
        }
        let header = TraceHeader {
            algo: algo.to_string(),
            seed: scenario.seed,
            horizon: scenario.horizon,
            scenario: digest,
        };
        let monitor = MonotonicityMonitor::new(n, family.len());
        let mut sim = Simulation {
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            scenario,
            family,
            procs,
            crashed: vec![false; n as usize],
            now: 0,
            inbox: BTreeMap::new(),
            timers: vec![BTreeMap::new(); n as usize],
            link_seq: BTreeMap::new(),
            link_floor: BTreeMap::new(),
            last_output: vec![None; n as usize],
            monitor,
            trace: Trace {
                header,
                events: Vec::new(),
                notes: Vec::new(),
            },
        };
        for p in (0..n).map(ProcessId) {
            let mut out = Outbox::default();
            sim.procs[p.0 as usize].on_init(&mut out);
            sim.apply_outbox(p, out);
            let output = sim.procs[p.0 as usize].output().cloned();
            sim.trace.events.push(TraceEvent {
                tick: 0,
                process: p,
                kind: EventKind::OutputChange,
                detail: String::new(),
                output: output.clone(),
            });
            sim.last_output[p.0 as usize] = output;
        }
        Ok(sim)
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn family(&self) -> &Arc<GraphFamily> {
        &self.family
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    pub fn monitor(&self) -> &MonotonicityMonitor {
        &self.monitor
    }

    /// Direct access to a process's protocol state, e.g. for downcasting in
    /// white-box checks.
    pub fn protocol(&self, p: ProcessId) -> &dyn ExtractionProtocol {
        self.procs[p.0 as usize].as_ref()
    }

    /// One global tick: crashes take effect first, then every live process
    /// in ascending id order handles due deliveries (per sender, in send
    /// order), due timer expiries (ascending peer), and — on multiples of
    /// K — its periodic task.
    pub fn advance(&mut self) -> Result<()> {
        if self.now >= self.scenario.horizon {
            return Err(Error::Config(format!(
                "advance past the scenario horizon {}",
                self.scenario.horizon
            )));
        }
        self.now += 1;
        let t = self.now;

        for (p, &ct) in self.scenario.crashes.clone().iter() {
            if ct == t {
                self.crashed[p.0 as usize] = true;
                let output = self.procs[p.0 as usize].output().cloned();
                self.trace.events.push(TraceEvent {
                    tick: t,
                    process: *p,
                    kind: EventKind::Crash,
                    detail: String::new(),
                    output,
                });
            }
        }

        // Messages due this tick; anything addressed to a crashed process
        // is dropped silently when this map goes out of scope.
        let mut due = self.inbox.remove(&t).unwrap_or_default();

        for p in (0..self.scenario.n).map(ProcessId) {
            if self.crashed[p.0 as usize] {
                continue;
            }
            if let Some(mut list) = due.remove(&p) {
                list.sort_by_key(|d| (d.from, d.seq));
                for d in list {
                    let kind = if d.rb {
                        EventKind::RbDeliver
                    } else {
                        EventKind::Deliver
                    };
                    let detail = format!(
                        "from={} to={} seq={} send={} payload={}",
                        d.from,
                        p,
                        d.seq,
                        d.send_tick,
                        d.payload.render(&self.family)
                    );
                    let output = self.procs[p.0 as usize].output().cloned();
                    self.trace.events.push(TraceEvent {
                        tick: t,
                        process: p,
                        kind,
                        detail,
                        output,
                    });
                    let mut out = Outbox::default();
                    if d.rb {
                        self.procs[p.0 as usize].on_rb_deliver(d.from, &d.payload, &mut out);
                    } else {
                        self.procs[p.0 as usize].on_deliver(d.from, &d.payload, &mut out);
                    }
                    self.apply_outbox(p, out);
                    self.note_output_change(p);
                }
            }

            // Timers still due after the deliveries above (a same-tick
            // re-arm pushes the expiry into the future and cancels it).
            let due_peers: Vec<ProcessId> = self.timers[p.0 as usize]
                .iter()
                .filter(|&(_, &expiry)| expiry == t)
                .map(|(&peer, _)| peer)
                .collect();
            for peer in due_peers {
                if self.timers[p.0 as usize].get(&peer) != Some(&t) {
                    continue;
                }
                self.timers[p.0 as usize].remove(&peer);
                let output = self.procs[p.0 as usize].output().cloned();
                self.trace.events.push(TraceEvent {
                    tick: t,
                    process: p,
                    kind: EventKind::TimerExpire,
                    detail: format!("peer={peer}"),
                    output,
                });
                let mut out = Outbox::default();
                self.procs[p.0 as usize].on_timer_expire(peer, &mut out);
                self.apply_outbox(p, out);
                self.note_output_change(p);
            }

            if t.is_multiple_of(self.scenario.k_period) {
                let mut out = Outbox::default();
                self.procs[p.0 as usize].on_periodic(&mut out);
                self.apply_outbox(p, out);
                self.note_output_change(p);
            }
        }
        Ok(())
    }

    /// Advances to the given tick (at most the scenario horizon).
    pub fn run_to(&mut self, horizon: Tick) -> Result<()> {
        if horizon > self.scenario.horizon {
            return Err(Error::Config(format!(
                "run horizon {horizon} exceeds the scenario horizon {}",
                self.scenario.horizon
            )));
        }
        while self.now < horizon {
            self.advance()?;
        }
        Ok(())
    }

    fn note_output_change(&mut self, p: ProcessId) {
        let current = self.procs[p.0 as usize].output().cloned();
        if current != self.last_output[p.0 as usize] {
            self.trace.events.push(TraceEvent {
                tick: self.now,
                process: p,
                kind: EventKind::OutputChange,
                detail: String::new(),
                output: current.clone(),
            });
            self.last_output[p.0 as usize] = current;
        }
    }

    fn apply_outbox(&mut self, p: ProcessId, out: Outbox) {
        if self.crashed[p.0 as usize] {
            // Unreachable through the normal step loop; kept as a guard so
            // a bug cannot smuggle actions out of a crashed process.
            self.trace.notes.push(format!(
                "actions by crashed process {p} at tick {} ignored",
                self.now
            ));
            return;
        }
        for bump in &out.bumps {
            self.monitor.record(p, bump);
        }
        for action in out.actions {
            match action {
                Action::Send { to, payload } => self.enqueue_send(p, to, payload),
                Action::SetTimer { peer, duration } => {
                    // (Re)arming replaces any running countdown for the peer.
                    self.timers[p.0 as usize].insert(peer, self.now + duration);
                }
                Action::Rbcast { payload } => self.enqueue_rbcast(p, payload),
            }
        }
    }

    fn enqueue_send(&mut self, from: ProcessId, to: ProcessId, payload: Payload) {
        let t = self.now;
        let raw = self.draw_point_delay(from, to, t);
        let deliver = self.assign_deliver(from, to, t, raw);
        let seq = self.next_seq(from, to);
        let detail = format!(
            "from={from} to={to} seq={seq} send={t} payload={}",
            payload.render(&self.family)
        );
        let output = self.procs[from.0 as usize].output().cloned();
        self.trace.events.push(TraceEvent {
            tick: t,
            process: from,
            kind: EventKind::Send,
            detail,
            output,
        });
        self.inbox
            .entry(deliver)
            .or_default()
            .entry(to)
            .or_default()
            .push(Delivery {
                from,
                seq,
                send_tick: t,
                payload,
                rb: false,
            });
    }

    /// Reliable broadcast: one leg per process (including the sender).
    /// All-or-nothing for a crashing sender: a scheduled drop, consulted
    /// only when the sender crashes while the broadcast is in flight,
    /// removes every leg. Legs emit no SEND events — the broadcast is a
    /// primitive, not n point-to-point sends.
    fn enqueue_rbcast(&mut self, from: ProcessId, payload: Payload) {
        let t = self.now;
        let bound = self.scenario.rbcast_bound;
        if let Some(&crash_tick) = self.scenario.crashes.get(&from) {
            let in_flight = t < crash_tick && crash_tick <= t + bound;
            if in_flight && self.scenario.rb_drops.contains(&(from, t)) {
                self.trace.notes.push(format!(
                    "broadcast by {from} at tick {t} dropped: sender crashes at {crash_tick} within the delivery bound"
                ));
                return;
            }
        }
        for q in (0..self.scenario.n).map(ProcessId) {
            let raw = if q == from {
                self.rng.gen_range(1..=bound)
            } else if self.scenario.truth.contains_edge(from, q) {
                self.rng.gen_range(1..=bound.min(self.scenario.delta))
            } else if let Some(min_delay) = self.directive_min_delay(from, q, t) {
                min_delay.max(1)
            } else {
                self.rng.gen_range(1..=bound)
            };
            let deliver = self.assign_deliver(from, q, t, raw);
            let seq = self.next_seq(from, q);
            self.inbox
                .entry(deliver)
                .or_default()
                .entry(q)
                .or_default()
                .push(Delivery {
                    from,
                    seq,
                    send_tick: t,
                    payload: payload.clone(),
                    rb: true,
                });
        }
    }

    fn draw_point_delay(&mut self, from: ProcessId, to: ProcessId, t: Tick) -> u64 {
        if self.scenario.truth.contains_edge(from, to) {
            self.rng.gen_range(1..=self.scenario.delta)
        } else if let Some(min_delay) = self.directive_min_delay(from, to, t) {
            min_delay.max(1)
        } else {
            self.rng.gen_range(1..=4 * self.scenario.delta)
        }
    }

    /// Largest matching directive floor for a send at tick t, if any.
    fn directive_min_delay(&self, from: ProcessId, to: ProcessId, t: Tick) -> Option<u64> {
        self.scenario
            .delays
            .iter()
            .filter(|d| d.from == from && d.to == to && d.window.0 <= t && t <= d.window.1)
            .map(|d| d.min_delay)
            .max()
    }

    /// Final delivery tick: strictly after the send; capped at the horizon
    /// for correct receivers (reliability: what is sent before the end of
    /// the run arrives within it); never before an earlier assignment on
    /// the same link (FIFO).
    fn assign_deliver(&mut self, from: ProcessId, to: ProcessId, send: Tick, raw: u64) -> Tick {
        let floor = self.link_floor.get(&(from, to)).copied().unwrap_or(0);
        let receiver_correct = !self.scenario.crashes.contains_key(&to);
        let base = if receiver_correct {
            (send + raw).min(self.scenario.horizon)
        } else {
            send + raw
        };
        let deliver = (send + 1).max(base).max(floor);
        self.link_floor.insert((from, to), deliver);
        deliver
    }

    fn next_seq(&mut self, from: ProcessId, to: ProcessId) -> u64 {
        let c = self.link_seq.entry((from, to)).or_insert(0);
        let seq = *c;
        *c += 1;
        seq
    }
}

/// Builds a scenario's simulation under the named algorithm and runs it to
/// its horizon, handing back the finished simulation (trace, monitor state,
/// final protocol states).
pub fn run_full(
    scenario: &Scenario,
    algo: &str,
    registry: &ProtocolRegistry,
) -> Result<Simulation> {
    let mut sim = Simulation::build(scenario.clone(), algo, registry)?;
    let horizon = sim.scenario.horizon;
    sim.run_to(horizon)?;
    Ok(sim)
}

/// Builds and runs a scenario to its horizon, keeping only the trace.
pub fn run_scenario(scenario: &Scenario, algo: &str, registry: &ProtocolRegistry) -> Result<Trace> {
    run_full(scenario, algo, registry).map(Simulation::into_trace)
}
