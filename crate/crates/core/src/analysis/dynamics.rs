use std::collections::BTreeMap;

use serde::Serialize;

use crate::engine::{DeviceId, Value};
use crate::sim::{Environment, Trace};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DynamicsMetrics {
    /// Time after `from` from which the error stays within tolerance until
    /// the end of the trace; `None` if it never settles.
    pub convergence_time: Option<f64>,
    pub peak_error: f64,
    /// Sum of sampled errors times the sampling period.
    pub cumulative_error: f64,
    pub samples: usize,
}

/// Samples the trace every `period` from `from` to its end, measuring the
/// largest per-device gap between the snapshot and `oracle` of the
/// environment in force. A device missing from either side counts as an
/// infinite error.
pub fn dynamics_metrics(
    trace: &Trace,
    oracle: impl Fn(&Environment) -> BTreeMap<DeviceId, Value>,
    from: f64,
    epsilon: f64,
    period: f64,
) -> DynamicsMetrics {
    assert!(period > 0.0, "sampling period must be positive");
    let end = trace.records.last().map_or(from, |r| r.event.time);
    let mut latest: BTreeMap<DeviceId, &Value> = BTreeMap::new();
    let mut cursor = 0;
    let mut cached: Option<(usize, BTreeMap<DeviceId, Value>)> = None;
    let (mut peak, mut cumulative, mut samples) = (0.0f64, 0.0f64, 0usize);
    let mut settled_since: Option<f64> = None;

    let mut k = 0u64;
    loop {
        let t = from + k as f64 * period;
        if t > end + 1e-9 * period {
            break;
        }
        k += 1;
        while cursor < trace.records.len() && trace.records[cursor].event.time <= t {
            let r = &trace.records[cursor];
            latest.insert(r.event.device, &r.result);
            cursor += 1;
        }
        let epoch = trace.epochs.partition_point(|(at, _)| *at <= t).saturating_sub(1);
        if cached.as_ref().map(|c| c.0) != Some(epoch) {
            cached = Some((epoch, oracle(&trace.epochs[epoch].1)));
        }
        let reference = &cached.as_ref().unwrap().1;
        let error = reference
            .iter()
            .map(|(d, want)| latest.get(d).and_then(|got| got.distance(want)).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max);
        peak = peak.max(error);
        cumulative += error * period;
        samples += 1;
        if error <= epsilon {
            settled_since.get_or_insert(t);
        } else {
            settled_since = None;
        }
    }
    DynamicsMetrics { convergence_time: settled_since.map(|t| t - from), peak_error: peak, cumulative_error: cumulative, samples }
}
