use std::collections::BTreeMap;

use serde::Serialize;

use super::Snapshot;
use crate::engine::{DeviceId, Value};
use crate::sim::Trace;

/// Default tolerance for programs that settle exactly.
pub const EXACT_EPSILON: f64 = 0.0;
/// Default tolerance for decay-style programs approaching a fixpoint.
pub const ASYMPTOTIC_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct StabilizationReport {
    pub stabilized: bool,
    /// Round index (time over base period) of the last change any device saw.
    pub stabilization_round: Option<u64>,
    /// Time at which every device had completed its quiet window.
    pub detected_at: Option<f64>,
    pub snapshot: Option<Snapshot>,
    pub epsilon: f64,
    pub quiet_rounds: usize,
    /// Devices without a long enough quiet tail, with the tail they had.
    pub restless: BTreeMap<DeviceId, usize>,
}

impl StabilizationReport {
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        #[serde(rename_all = "camelCase")]
        struct Out<'a> {
            stabilized: bool,
            stabilization_round: Option<u64>,
            detected_at: Option<f64>,
            epsilon: f64,
            quiet_rounds: usize,
            restless: &'a BTreeMap<DeviceId, usize>,
            snapshot: Option<serde_json::Value>,
        }
        serde_json::to_value(Out {
            stabilized: self.stabilized,
            stabilization_round: self.stabilization_round,
            detected_at: self.detected_at,
            epsilon: self.epsilon,
            quiet_rounds: self.quiet_rounds,
            restless: &self.restless,
            snapshot: self.snapshot.as_ref().map(Snapshot::to_json),
        })
        .expect("report serialises")
    }
}

/// Decides whether the field stopped changing after `freeze_time`: every
/// device live at the end must finish the trace with at least
/// `quiet_rounds` own rounds (at or after `freeze_time`) whose result moved
/// by at most `epsilon` from the previous one.
pub fn detect_stabilization(trace: &Trace, freeze_time: f64, quiet_rounds: usize, epsilon: f64) -> StabilizationReport {
    let env = trace.final_environment();
    let mut series: BTreeMap<DeviceId, Vec<(f64, &Value)>> = env.ids().map(|d| (d, Vec::new())).collect();
    for r in &trace.records {
        if let Some(s) = series.get_mut(&r.event.device) {
            s.push((r.event.time, &r.result));
        }
    }
    let mut restless = BTreeMap::new();
    let mut last_change = f64::NEG_INFINITY;
    let mut detected = f64::NEG_INFINITY;
    for (d, s) in &series {
        // trailing quiet rounds, counting only rounds at or after the freeze
        let mut quiet = 0;
        let mut i = s.len();
        while i >= 2 && s[i - 1].0 >= freeze_time && s[i - 1].1.within(s[i - 2].1, epsilon) {
            quiet += 1;
            i -= 1;
        }
        if quiet < quiet_rounds || s.is_empty() {
            restless.insert(*d, quiet);
            continue;
        }
        // i - 1 is the last round that changed (or the first ever round)
        last_change = last_change.max(s[i - 1].0);
        detected = detected.max(s[i - 1 + quiet_rounds].0);
    }
    let stabilized = restless.is_empty() && !series.is_empty();
    StabilizationReport {
        stabilized,
        stabilization_round: stabilized.then(|| (last_change.max(0.0) / trace.base_period).round() as u64),
        detected_at: stabilized.then_some(detected),
        snapshot: stabilized.then(|| Snapshot::at(trace, detected)),
        epsilon,
        quiet_rounds,
        restless,
    }
}
