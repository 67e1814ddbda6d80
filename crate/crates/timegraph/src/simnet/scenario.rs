//! Run descriptions: process count, graph family, the run's true timeliness
//! graph, timing parameters, crash schedule, and adversary directives, with
//! a canonical TOML form and a content digest for trace/scenario pairing.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graphs::{FamilyTag, GraphFamily, ProcessId, TimelinessGraph};
use crate::protocol::Tick;

/// Forces a minimum delivery delay on one link for sends inside a tick
/// window. Directives may never touch a timely link: the truth graph's δ
/// bound is inviolable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayDirective {
    pub from: ProcessId,
    pub to: ProcessId,
    /// Inclusive send-tick window the directive applies to.
    pub window: (Tick, Tick),
    pub min_delay: u64,
}

/// A complete, replayable run description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n: u32,
    pub family: FamilyTag,
    /// Family members, for [`FamilyTag::Custom`] only; empty otherwise.
    pub members: Vec<TimelinessGraph>,
    /// The run's true timeliness graph: nodes are exactly the processes
    /// that never crash, edges are the timely links.
    pub truth: TimelinessGraph,
    /// Delivery bound on timely links, in ticks.
    pub delta: u64,
    /// Heartbeat/accusation period K, in ticks.
    pub k_period: u64,
    /// Delivery-latency cap for reliable broadcast, in ticks.
    pub rbcast_bound: u64,
    pub horizon: Tick,
    pub seed: u64,
    /// Crash tick per faulty process; a process takes no step at or after
    /// its crash tick.
    pub crashes: BTreeMap<ProcessId, Tick>,
    pub delays: Vec<DelayDirective>,
    /// Broadcasts to drop entirely, keyed by (sender, send tick); consulted
    /// only when the sender crashes while that broadcast is in flight.
    pub rb_drops: BTreeSet<(ProcessId, Tick)>,
}

impl Scenario {
    /// Default run length: generous room for every counter to settle.
    pub fn default_horizon(n: u32, k_period: u64, delta: u64) -> Tick {
        10 * u64::from(n) * k_period * delta
    }

    /// A scenario with no crashes, no directives, and default timing.
    pub fn minimal(n: u32, family: FamilyTag, truth: TimelinessGraph) -> Self {
        let (delta, k_period) = (3, 5);
        Scenario {
            n,
            family,
            members: Vec::new(),
            truth,
            delta,
            k_period,
            rbcast_bound: delta,
            horizon: Self::default_horizon(n, k_period, delta),
            seed: 0,
            crashes: BTreeMap::new(),
            delays: Vec::new(),
            rb_drops: BTreeSet::new(),
        }
    }

    pub fn build_family(&self) -> Result<GraphFamily> {
        match self.family {
            FamilyTag::Custom => GraphFamily::custom(self.n, self.members.iter().cloned()),
            tag => GraphFamily::generate(tag, self.n),
        }
    }

    /// The processes that never crash, ascending.
    pub fn correct(&self) -> BTreeSet<ProcessId> {
        (0..self.n)
            .map(ProcessId)
            .filter(|p| !self.crashes.contains_key(p))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.delta == 0 {
            return Err(Error::Config("delta must be at least 1".into()));
        }
        if self.k_period == 0 {
            return Err(Error::Config("k_period must be at least 1".into()));
        }
        if self.rbcast_bound == 0 {
            return Err(Error::Config("rbcast_bound must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        match self.family {
            FamilyTag::Custom if self.members.is_empty() => {
                return Err(Error::Config(
                    "members: the CUSTOM family needs at least one member".into(),
                ));
            }
            FamilyTag::Custom => {}
            _ if !self.members.is_empty() => {
                return Err(Error::Config(format!(
                    "members: only the CUSTOM family takes explicit members, not {}",
                    self.family
                )));
            }
            _ => {}
        }
        for (&p, &t) in &self.crashes {
            if p.0 >= self.n {
                return Err(Error::Config(format!(
                    "crashes: process {p} is outside 0..{}",
                    self.n
                )));
            }
            if t == 0 || t > self.horizon {
                return Err(Error::Config(format!(
                    "crashes: tick {t} for process {p} must be in 1..={}",
                    self.horizon
                )));
            }
        }
        for node in self.truth.nodes() {
            if node.0 >= self.n {
                return Err(Error::Config(format!(
                    "truth: node {node} is outside 0..{}",
                    self.n
                )));
            }
        }
        if self.truth.node_set() != self.correct() {
            return Err(Error::Config(
                "truth: nodes must be exactly the processes without a crash tick".into(),
            ));
        }
        for d in &self.delays {
            if d.from.0 >= self.n || d.to.0 >= self.n {
                return Err(Error::Config(format!(
                    "delay: link ({},{}) is outside 0..{}",
                    d.from, d.to, self.n
                )));
            }
            if d.from == d.to {
                return Err(Error::Config(format!(
                    "delay: link ({},{}) is a self-loop",
                    d.from, d.to
                )));
            }
            if self.truth.contains_edge(d.from, d.to) {
                return Err(Error::Config(format!(
                    "delay: link ({},{}) is timely; directives may not break the delta bound",
                    d.from, d.to
                )));
            }
            if d.min_delay == 0 {
                return Err(Error::Config("delay: min_delay must be at least 1".into()));
            }
            if d.window.0 > d.window.1 {
                return Err(Error::Config(format!(
                    "delay: window [{},{}] is empty",
                    d.window.0, d.window.1
                )));
            }
        }
        for &(p, t) in &self.rb_drops {
            if p.0 >= self.n {
                return Err(Error::Config(format!(
                    "rb_drop: process {p} is outside 0..{}",
                    self.n
                )));
            }
            if t > self.horizon {
                return Err(Error::Config(format!(
                    "rb_drop: tick {t} is past the horizon {}",
                    self.horizon
                )));
            }
        }
        Ok(())
    }

    /// Canonical TOML form: every field explicit, fixed order. Two scenario
    /// files that parse to the same value have the same canonical form.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(&RawScenario::from_typed(self))
            .map_err(|e| Error::Config(format!("scenario serialization: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawScenario =
            toml::from_str(text).map_err(|e| Error::Parse(format!("scenario: {e}")))?;
        let s = raw.into_typed()?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    /// Content digest of the canonical form; traces carry it so a trace can
    /// be paired with the exact scenario that produced it.
    pub fn digest(&self) -> Result<String> {
        let canon = self.to_toml()?;
        let mut hasher = Sha256::new();
        hasher.update(canon.as_bytes());
        Ok(format!("{:x}", hasher.finalize()))
    }
}

/// Serialization mirror. Scalars first so TOML emits them before tables;
/// optional timing fields default on read but are always explicit in the
/// canonical form.
#[derive(Serialize, Deserialize)]
struct RawScenario {
    n: u32,
    family: String,
    truth: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k_period: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rbcast_bound: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    horizon: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    members: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    crashes: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty", rename = "delay")]
    delays: Vec<RawDelay>,
    #[serde(default, skip_serializing_if = "Vec::is_empty", rename = "rb_drop")]
    rb_drops: Vec<RawDrop>,
}

#[derive(Serialize, Deserialize)]
struct RawDelay {
    from: u32,
    to: u32,
    window: [u64; 2],
    min_delay: u64,
}

#[derive(Serialize, Deserialize)]
struct RawDrop {
    process: u32,
    tick: u64,
}

impl RawScenario {
    fn from_typed(s: &Scenario) -> Self {
        RawScenario {
            n: s.n,
            family: s.family.to_string(),
            truth: s.truth.to_string(),
            delta: Some(s.delta),
            k_period: Some(s.k_period),
            rbcast_bound: Some(s.rbcast_bound),
            horizon: Some(s.horizon),
            seed: Some(s.seed),
            members: s.members.iter().map(|m| m.to_string()).collect(),
            crashes: s
                .crashes
                .iter()
                .map(|(p, &t)| (p.0.to_string(), t))
                .collect(),
            delays: s
                .delays
                .iter()
                .map(|d| RawDelay {
                    from: d.from.0,
                    to: d.to.0,
                    window: [d.window.0, d.window.1],
                    min_delay: d.min_delay,
                })
                .collect(),
            rb_drops: s
                .rb_drops
                .iter()
                .map(|&(p, t)| RawDrop {
                    process: p.0,
                    tick: t,
                })
                .collect(),
        }
    }

    fn into_typed(self) -> Result<Scenario> {
        let family: FamilyTag = self.family.parse()?;
        let truth: TimelinessGraph = self.truth.parse()?;
        let members = self
            .members
            .iter()
            .map(|m| m.parse())
            .collect::<Result<Vec<TimelinessGraph>>>()?;
        let delta = self.delta.unwrap_or(3);
        let k_period = self.k_period.unwrap_or(5);
        let rbcast_bound = self.rbcast_bound.unwrap_or(delta);
        let horizon = self
            .horizon
            .unwrap_or_else(|| Scenario::default_horizon(self.n, k_period, delta));
        let mut crashes = BTreeMap::new();
        for (key, tick) in self.crashes {
            let p: u32 = key
                .parse()
                .map_err(|_| Error::Parse(format!("crashes: key {key:?} is not a process id")))?;
            crashes.insert(ProcessId(p), tick);
        }
        Ok(Scenario {
            n: self.n,
            family,
            members,
            truth,
            delta,
            k_period,
            rbcast_bound,
            horizon,
            seed: self.seed.unwrap_or(0),
            crashes,
            delays: self
                .delays
                .into_iter()
                .map(|d| DelayDirective {
                    from: ProcessId(d.from),
                    to: ProcessId(d.to),
                    window: (d.window[0], d.window[1]),
                    min_delay: d.min_delay,
                })
                .collect(),
            rb_drops: self
                .rb_drops
                .into_iter()
                .map(|d| (ProcessId(d.process), d.tick))
                .collect(),
        })
    }
}
