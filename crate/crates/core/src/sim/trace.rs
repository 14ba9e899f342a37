use std::io::Write;

use serde::Serialize;

use super::{Environment, SimError};
use crate::engine::{DeviceId, Export, Value};

/// One round of one device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub device: DeviceId,
    pub time: f64,
    /// Per-device round counter, starting at 0.
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub event: Event,
    pub result: Value,
    pub digest: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum StopReason {
    /// The round budget ran out.
    Budget,
    /// Every device reported the configured number of quiet rounds.
    Stabilized,
    /// No device left to fire.
    Empty,
}

/// Space-time record of a run.
#[derive(Debug, Clone)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    /// Full export after each record, when requested.
    pub exports: Option<Vec<Export>>,
    /// Environment at start, then after every batch of perturbations.
    pub epochs: Vec<(f64, Environment)>,
    pub base_period: f64,
    pub stop: StopReason,
    pub end_time: f64,
}

impl Trace {
    pub(crate) fn new(env: Environment, base_period: f64, record_exports: bool) -> Self {
        Self {
            records: Vec::new(),
            exports: record_exports.then(Vec::new),
            epochs: vec![(0.0, env)],
            base_period,
            stop: StopReason::Budget,
            end_time: 0.0,
        }
    }

    /// Environment in force at time `t`.
    pub fn environment_at(&self, t: f64) -> &Environment {
        let i = self.epochs.partition_point(|(at, _)| *at <= t);
        &self.epochs[i.saturating_sub(1)].1
    }

    pub fn final_environment(&self) -> &Environment {
        &self.epochs.last().expect("trace has an initial epoch").1
    }

    /// Time of the last environment change, 0 for a static run.
    pub fn last_change(&self) -> f64 {
        self.epochs.last().map_or(0.0, |(t, _)| *t)
    }

    /// Writes `time,device,seq,value` rows. Numbers use shortest round-trip
    /// formatting, so parsing a cell gives back the exact value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "device", "seq", "value"])?;
        for r in &self.records {
            w.write_record([r.event.time.to_string(), r.event.device.0.to_string(), r.event.seq.to_string(), r.result.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// Every record with its full export, as JSON.
    pub fn exports_json(&self) -> serde_json::Value {
        let exports = self.exports.as_deref().unwrap_or(&[]);
        let rows: Vec<serde_json::Value> = self
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                serde_json::json!({
                    "time": r.event.time,
                    "device": r.event.device,
                    "seq": r.event.seq,
                    "value": r.result.to_json(),
                    "digest": format!("{:016x}", r.digest),
                    "export": exports.get(i).map(Export::to_json),
                })
            })
            .collect();
        serde_json::Value::Array(rows)
    }
}
