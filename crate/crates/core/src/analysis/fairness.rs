use std::collections::BTreeMap;

use serde::Serialize;

use crate::engine::DeviceId;
use crate::sim::Trace;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FairnessReport {
    pub fair: bool,
    pub window: f64,
    /// Longest stretch any live device went without firing.
    pub worst_gap: f64,
    /// Devices whose longest silent stretch exceeded the window.
    pub violations: BTreeMap<DeviceId, f64>,
}

/// Checks that every device fires at least once in any window of `window`
/// seconds while it is live: from joining to its first round, between
/// consecutive rounds, and from its last round to its removal or the end of
/// the run.
pub fn check_fairness(trace: &Trace, window: f64) -> FairnessReport {
    let mut joined: BTreeMap<DeviceId, f64> = BTreeMap::new();
    let mut left: BTreeMap<DeviceId, f64> = BTreeMap::new();
    for (at, env) in &trace.epochs {
        for d in env.ids() {
            joined.entry(d).or_insert(*at);
        }
        for d in joined.keys() {
            if !env.contains(*d) {
                left.entry(*d).or_insert(*at);
            }
        }
    }
    let mut last: BTreeMap<DeviceId, f64> = joined.clone();
    let mut gaps: BTreeMap<DeviceId, f64> = BTreeMap::new();
    for r in &trace.records {
        let d = r.event.device;
        let prev = last.insert(d, r.event.time).unwrap_or(r.event.time);
        let g = gaps.entry(d).or_insert(0.0);
        *g = g.max(r.event.time - prev);
    }
    for (d, t) in &last {
        let until = left.get(d).copied().unwrap_or(trace.end_time);
        let g = gaps.entry(*d).or_insert(0.0);
        *g = g.max(until - t);
    }
    let worst_gap = gaps.values().copied().fold(0.0, f64::max);
    let violations: BTreeMap<DeviceId, f64> = gaps.into_iter().filter(|(_, g)| *g > window).collect();
    FairnessReport { fair: violations.is_empty(), window, worst_gap, violations }
}
