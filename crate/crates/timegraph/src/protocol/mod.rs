//! Extraction protocols as pure state machines.
//!
//! A protocol instance owns one process's state. The simulator drives it
//! through the handler methods of [`ExtractionProtocol`]; every handler
//! receives an [`Outbox`] into which it pushes network actions and counter
//! observations. Handlers never see the clock or the network directly, which
//! keeps them deterministic and unit-testable in isolation.

pub mod basic;
pub mod efficient;

use std::any::Any;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graphs::{GraphFamily, ProcessId, TimelinessGraph};

/// Simulation time. One tick is the atomic step unit of the lock-step model.
pub type Tick = u64;

/// Index into a family's sorted member list.
pub type MemberIdx = usize;

/// Wire payloads. `Alive` and `New` travel point-to-point; the accusation
/// payloads travel by reliable broadcast only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Alive,
    /// Accusation of the basic algorithm: `link_from = None` blames every
    /// member not containing `accuser`; `Some(q)` blames every member with
    /// the edge `(q, accuser)`.
    BasicAcc {
        link_from: Option<ProcessId>,
        accuser: ProcessId,
    },
    /// Candidate proposal of the efficient algorithm.
    New {
        member: MemberIdx,
        acc: u64,
        prop: u64,
        d: u64,
    },
    /// Candidate accusation of the efficient algorithm.
    EffAcc {
        member: MemberIdx,
        acc: u64,
        prop: u64,
        d: u64,
    },
}

impl Payload {
    /// True for payloads that must travel by reliable broadcast.
    pub fn is_broadcast(&self) -> bool {
        matches!(self, Payload::BasicAcc { .. } | Payload::EffAcc { .. })
    }

    /// Stable text encoding used in trace `detail` fields. Member indices
    /// are rendered through `family` as the graph text form.
    pub fn render(&self, family: &GraphFamily) -> String {
        match self {
            Payload::Alive => "ALIVE".to_string(),
            Payload::BasicAcc { link_from, accuser } => {
                let q = match link_from {
                    Some(p) => p.to_string(),
                    None => "⊥".to_string(),
                };
                format!("ACC{{q:{q},h:{accuser}}}")
            }
            Payload::New {
                member,
                acc,
                prop,
                d,
            } => format!(
                "NEW{{x:{},a:{acc},pr:{prop},d:{d}}}",
                family.member(*member)
            ),
            Payload::EffAcc {
                member,
                acc,
                prop,
                d,
            } => format!(
                "ACC{{x:{},a:{acc},pr:{prop},d:{d}}}",
                family.member(*member)
            ),
        }
    }
}

/// A network or timer action requested by a handler, applied by the
/// simulator in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Send { to: ProcessId, payload: Payload },
    SetTimer { peer: ProcessId, duration: Tick },
    Rbcast { payload: Payload },
}

/// Which protocol counter a bump observation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CounterKind {
    Acc,
    Prop,
}

impl fmt::Display for CounterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CounterKind::Acc => write!(f, "acc"),
            CounterKind::Prop => write!(f, "prop"),
        }
    }
}

/// An observation of a counter write: the post-write value. The harness uses
/// these to verify counters never decrease.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterBump {
    pub member: MemberIdx,
    pub kind: CounterKind,
    pub value: u64,
}

/// Collects everything a handler wants to happen: actions in order, plus
/// counter observations for the monotonicity monitor.
#[derive(Debug, Default)]
pub struct Outbox {
    pub actions: Vec<Action>,
    pub bumps: Vec<CounterBump>,
}

impl Outbox {
    pub fn send(&mut self, to: ProcessId, payload: Payload) {
        self.actions.push(Action::Send { to, payload });
    }

    pub fn set_timer(&mut self, peer: ProcessId, duration: Tick) {
        self.actions.push(Action::SetTimer { peer, duration });
    }

    pub fn rbcast(&mut self, payload: Payload) {
        self.actions.push(Action::Rbcast { payload });
    }

    pub fn bump(&mut self, member: MemberIdx, kind: CounterKind, value: u64) {
        self.bumps.push(CounterBump {
            member,
            kind,
            value,
        });
    }
}

/// Construction context handed to protocol factories.
#[derive(Clone)]
pub struct ProtocolContext {
    pub me: ProcessId,
    pub n: u32,
    pub family: Arc<GraphFamily>,
    pub k_period: Tick,
}

/// One process's protocol state machine. The simulator calls `on_init`
/// exactly once at tick 0, then the event handlers; it reads `output` after
/// every handler to detect output changes.
pub trait ExtractionProtocol {
    fn on_init(&mut self, out: &mut Outbox);

    /// Periodic task, fired every `k_period` ticks.
    fn on_periodic(&mut self, out: &mut Outbox);

    /// Point-to-point delivery (`Alive` or `New`).
    fn on_deliver(&mut self, from: ProcessId, payload: &Payload, out: &mut Outbox);

    /// Reliable-broadcast delivery (accusations).
    fn on_rb_deliver(&mut self, from: ProcessId, payload: &Payload, out: &mut Outbox);

    /// The per-peer timer for `peer` expired (and is now disarmed unless the
    /// handler re-arms it).
    fn on_timer_expire(&mut self, peer: ProcessId, out: &mut Outbox);

    /// Current extracted graph, if the protocol has one.
    fn output(&self) -> Option<&TimelinessGraph>;

    /// Downcasting hook for state inspection in tests.
    fn as_any(&self) -> &dyn Any;
}

/// Factory producing a fresh protocol instance for one process.
pub type ProtocolFactory =
    Box<dyn Fn(&ProtocolContext) -> Result<Box<dyn ExtractionProtocol>> + Send + Sync>;

/// Name-keyed registry of protocol implementations. Simulations select an
/// algorithm by name, so configs and the CLI stay decoupled from concrete
/// types.
pub struct ProtocolRegistry {
    factories: BTreeMap<String, ProtocolFactory>,
}

impl ProtocolRegistry {
    pub fn new() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// Registry with the built-in algorithms:
    /// - `basic`: accusation counters over the whole family, alives on all
    ///   links.
    /// - `efficient`: root-proposed candidates, alives confined to candidate
    ///   edges; requires every family member to have a root.
    /// - `basic-exact`: the basic algorithm restricted to members whose node
    ///   set matches the currently-unsuspected processes — a deliberately
    ///   exactness-claiming variant used by the adversary-schedule suite.
    pub fn builtin() -> Self {
        let mut reg = Self::new();
        reg.register("basic", |ctx| {
            Ok(Box::new(basic::BasicProtocol::new(ctx, false)?) as Box<dyn ExtractionProtocol>)
        });
        reg.register("basic-exact", |ctx| {
            Ok(Box::new(basic::BasicProtocol::new(ctx, true)?) as Box<dyn ExtractionProtocol>)
        });
        reg.register("efficient", |ctx| {
            Ok(Box::new(efficient::EfficientProtocol::new(ctx)?) as Box<dyn ExtractionProtocol>)
        });
        reg
    }

    pub fn register(
        &mut self,
        name: &str,
        factory: impl Fn(&ProtocolContext) -> Result<Box<dyn ExtractionProtocol>>
            + Send
            + Sync
            + 'static,
    ) {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn create(&self, name: &str, ctx: &ProtocolContext) -> Result<Box<dyn ExtractionProtocol>> {
        match self.factories.get(name) {
            Some(factory) => factory(ctx),
            None => Err(Error::Config(format!(
                "unknown algorithm {name:?}; known: {}",
                self.names().join(", ")
            ))),
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(|s| s.as_str()).collect()
    }
}

impl Default for ProtocolRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
