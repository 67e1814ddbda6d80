//! Run traces: one header line plus one line per event, JSON per line, with
//! free-form note lines prefixed `# `. Event `detail` strings are
//! space-separated `key=value` tokens (values never contain spaces), so a
//! trace is greppable and still machine-checkable.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{ProcessId, TimelinessGraph};
use crate::protocol::Tick;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    /// Registry name of the algorithm that produced the run.
    pub algo: String,
    pub seed: u64,
    pub horizon: Tick,
    /// Digest of the canonical scenario form (see `Scenario::digest`).
    pub scenario: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    #[serde(rename = "SEND")]
    Send,
    #[serde(rename = "DELIVER")]
    Deliver,
    #[serde(rename = "RB_DELIVER")]
    RbDeliver,
    #[serde(rename = "TIMER_EXPIRE")]
    TimerExpire,
    #[serde(rename = "CRASH")]
    Crash,
    #[serde(rename = "OUTPUT_CHANGE")]
    OutputChange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tick: Tick,
    pub process: ProcessId,
    pub kind: EventKind,
    /// `key=value` tokens: message events carry
    /// `from= to= seq= send= payload=`; timer expiries carry `peer=`.
    pub detail: String,
    /// The process's current output at the moment of the event; `null`
    /// marks the explicit no-output state.
    pub output: Option<TimelinessGraph>,
}

impl TraceEvent {
    /// The value of one `key=value` token in `detail`.
    pub fn detail_field(&self, key: &str) -> Option<&str> {
        self.detail
            .split(' ')
            .find_map(|tok| tok.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
    }

    pub fn detail_u64(&self, key: &str) -> Option<u64> {
        self.detail_field(key)?.parse().ok()
    }

    pub fn detail_process(&self, key: &str) -> Option<ProcessId> {
        Some(ProcessId(self.detail_field(key)?.parse().ok()?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
    /// Human-oriented remarks; serialized as trailing `# ` lines.
    pub notes: Vec<String>,
}

impl Trace {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        out.push_str(
            &serde_json::to_string(&self.header)
                .map_err(|e| Error::Config(format!("trace header serialization: {e}")))?,
        );
        out.push('\n');
        for ev in &self.events {
            out.push_str(
                &serde_json::to_string(ev)
                    .map_err(|e| Error::Config(format!("trace event serialization: {e}")))?,
            );
            out.push('\n');
        }
        for note in &self.notes {
            out.push_str("# ");
            out.push_str(note);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut header: Option<TraceHeader> = None;
        let mut events = Vec::new();
        let mut notes = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(note) = line.strip_prefix('#') {
                notes.push(note.trim_start().to_string());
                continue;
            }
            if header.is_none() {
                header = Some(serde_json::from_str(line).map_err(|e| {
                    Error::Parse(format!("trace line {}: bad header: {e}", lineno + 1))
                })?);
            } else {
                events.push(serde_json::from_str(line).map_err(|e| {
                    Error::Parse(format!("trace line {}: bad event: {e}", lineno + 1))
                })?);
            }
        }
        let header = header.ok_or_else(|| Error::Parse("trace has no header line".into()))?;
        Ok(Trace {
            header,
            events,
            notes,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_jsonl(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_jsonl()?)?;
        Ok(())
    }

    /// Events of one kind, in trace order.
    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// The last OUTPUT_CHANGE per process, i.e. each process's final output
    /// and when it settled there.
    pub fn final_outputs(
        &self,
    ) -> std::collections::BTreeMap<ProcessId, (Tick, Option<TimelinessGraph>)> {
        let mut map = std::collections::BTreeMap::new();
        for ev in self.of_kind(EventKind::OutputChange) {
            map.insert(ev.process, (ev.tick, ev.output.clone()));
        }
        map
    }
}
