//! Seeded scenario generation for the property suites: each (family, n,
//! seed) triple deterministically yields a validated scenario with an
//! optional early crash, a ground truth spanning the survivors, and a few
//! delay directives on non-timely links.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::graphs::{FamilyTag, GraphFamily, ProcessId, TimelinessGraph};
use crate::simnet::{DelayDirective, Scenario};

/// Derives a runnable scenario from (family, n, seed). The ground truth is
/// built over a family member spanning the correct processes — so the
/// extraction properties are always satisfiable — plus extra timely links;
/// when no member spans the survivors of a drawn crash, the crash is
/// dropped instead.
pub fn random_scenario(tag: FamilyTag, n: u32, seed: u64) -> Result<Scenario> {
    let family = GraphFamily::generate(tag, n)?;
    let salt = tag
        .name()
        .bytes()
        .fold(0u64, |h, b| h.wrapping_mul(131).wrapping_add(u64::from(b)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ salt);

    let delta: u64 = 3;
    let k_period: u64 = 5;
    let horizon = Scenario::default_horizon(n, k_period, delta);

    // Optionally crash one process early on.
    let mut victim = None;
    if rng.gen_bool(0.5) {
        victim = Some((
            ProcessId(rng.gen_range(0..n)),
            rng.gen_range(1..=horizon / 5),
        ));
    }
    let spanning = |keep: &BTreeSet<ProcessId>| -> Vec<&TimelinessGraph> {
        family
            .members()
            .iter()
            .filter(|m| m.node_set() == *keep)
            .collect()
    };
    let everyone: BTreeSet<ProcessId> = (0..n).map(ProcessId).collect();
    let survivors: BTreeSet<ProcessId> = everyone
        .iter()
        .copied()
        .filter(|p| victim.map(|(v, _)| v) != Some(*p))
        .collect();
    let (correct, pool) = {
        let pool = spanning(&survivors);
        if pool.is_empty() {
            victim = None;
            (everyone.clone(), spanning(&everyone))
        } else {
            (survivors, pool)
        }
    };
    let base = pool[rng.gen_range(0..pool.len())].clone();

    // The base member's links are timely; sprinkle extra timely links.
    let mut edges: BTreeSet<(ProcessId, ProcessId)> = base.edges().iter().copied().collect();
    for &a in &correct {
        for &b in &correct {
            if a != b && rng.gen_bool(0.3) {
                edges.insert((a, b));
            }
        }
    }
    let truth = TimelinessGraph::new(correct.iter().copied(), edges)?;

    let mut scenario = Scenario::minimal(n, tag, truth);
    scenario.seed = seed;
    // Crashes and delay windows were drawn within the first fifth and third
    // of the base budget; stretching the horizon leaves a long quiet tail,
    // so runs are judged on whether they settle, not on whether the
    // candidate-elimination race happened to fit the minimal budget.  The
    // richest family at the suite size fields over a hundred candidates,
    // eliminating one costs up to a timer round trip, and a blame that
    // crosses a withdrawal is discarded as stale — so the election can
    // retry the same candidate several times before an accusation lands
    // in its live window.  The slowest observed races need several
    // multiples of the base budget before the margin check.
    scenario.horizon = 8 * horizon;
    if let Some((p, tick)) = victim {
        scenario.crashes.insert(p, tick);
    }

    // Up to two delay directives on non-timely links, windowed within the
    // first third of the run.
    let slow: Vec<(ProcessId, ProcessId)> = (0..n)
        .flat_map(|a| (0..n).map(move |b| (ProcessId(a), ProcessId(b))))
        .filter(|&(a, b)| a != b && !scenario.truth.contains_edge(a, b))
        .collect();
    if !slow.is_empty() {
        for _ in 0..rng.gen_range(0..=2u32) {
            let (from, to) = slow[rng.gen_range(0..slow.len())];
            let start = rng.gen_range(1..=horizon / 3);
            let window = (start, start + rng.gen_range(0..=4 * delta));
            let min_delay = rng.gen_range(delta..=8 * delta);
            scenario.delays.push(DelayDirective {
                from,
                to,
                window,
                min_delay,
            });
        }
    }
    scenario.validate()?;
    Ok(scenario)
}
