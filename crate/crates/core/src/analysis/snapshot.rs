use std::collections::BTreeMap;

use serde::Serialize;

use crate::engine::{DeviceId, Value};
use crate::sim::Trace;

/// The last value available at each live device at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub values: BTreeMap<DeviceId, Value>,
}

impl Snapshot {
    /// Values at time `t`: devices live at `t` that have fired at or before it.
    pub fn at(trace: &Trace, t: f64) -> Self {
        let env = trace.environment_at(t);
        let end = trace.records.partition_point(|r| r.event.time <= t);
        let mut values = BTreeMap::new();
        for r in &trace.records[..end] {
            if env.contains(r.event.device) {
                values.insert(r.event.device, r.result.clone());
            }
        }
        values.retain(|d, _| env.contains(*d));
        Self { time: t, values }
    }

    /// Values at the end of the run.
    pub fn last(trace: &Trace) -> Self {
        Self::at(trace, trace.records.last().map_or(0.0, |r| r.event.time))
    }

    /// Largest per-device difference to `reference`; infinite when a device
    /// is missing on either side or values are not comparable.
    pub fn max_error(&self, reference: &BTreeMap<DeviceId, Value>) -> f64 {
        if self.values.len() != reference.len() {
            return f64::INFINITY;
        }
        self.values
            .iter()
            .map(|(d, v)| reference.get(d).and_then(|r| v.distance(r)).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }

    /// Device-wise equality up to `eps` on numbers, exact elsewhere.
    pub fn agrees_with(&self, other: &Snapshot, eps: f64) -> bool {
        self.values.len() == other.values.len() && self.values.iter().all(|(d, v)| other.values.get(d).is_some_and(|w| v.within(w, eps)))
    }

    pub fn numbers(&self) -> Option<BTreeMap<DeviceId, f64>> {
        self.values.iter().map(|(d, v)| v.as_num().map(|x| (*d, x))).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Row {
            device: DeviceId,
            value: serde_json::Value,
        }
        let rows: Vec<Row> = self.values.iter().map(|(d, v)| Row { device: *d, value: v.to_json() }).collect();
        serde_json::json!({ "time": self.time, "values": rows })
    }
}
