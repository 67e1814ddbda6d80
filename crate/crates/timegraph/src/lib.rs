//! Deterministic simulator and verification harness for timeliness-graph
//! extraction protocols over partially synchronous networks with crash
//! faults.
//!
//! The crate is organized in layers:
//!
//! - [`graphs`]: timeliness graphs, dicut reductions, and the named graph
//!   families used as extraction targets.
//! - [`protocol`]: the extraction protocols themselves, behind the
//!   [`protocol::ExtractionProtocol`] trait and a name-keyed registry.
//! - [`simnet`]: scenario descriptions, the lock-step network simulator, and
//!   the trace format it emits.
//! - [`harness`]: property evaluation over finished traces, the brute-force
//!   extraction oracle, scenario generators, and scripted adversary runs.

pub mod error;
pub mod graphs;
pub mod harness;
pub mod protocol;
pub mod simnet;

pub use error::{Error, Result};
