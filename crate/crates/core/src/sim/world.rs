use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use ordered_float::OrderedFloat;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Environment, Event, SimError, StopReason, Trace, TraceRecord};
use crate::engine::{eval_round, DeviceId, Export, Path, RoundContext, RoundOutput, Sensors, Value};
use crate::lang::Program;

// Independent random streams derived from the run seed.
const STREAM_SCHEDULE: u64 = 1;
const STREAM_WARM_START: u64 = 2;
const STREAM_PERTURBATION: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ScheduleMode {
    /// Global rounds at multiples of the base period; every device reads the
    /// previous round's exports.
    Synchronous,
    /// Each device fires every `base_period * (1 ± jitter)` seconds.
    FairAsync,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Schedule {
    pub mode: ScheduleMode,
    #[serde(default = "one")]
    pub base_period: f64,
    #[serde(default)]
    pub jitter: f64,
}

fn one() -> f64 {
    1.0
}

impl Schedule {
    pub fn synchronous() -> Self {
        Self { mode: ScheduleMode::Synchronous, base_period: 1.0, jitter: 0.0 }
    }

    pub fn fair_async(jitter: f64) -> Self {
        Self { mode: ScheduleMode::FairAsync, base_period: 1.0, jitter }
    }

    fn validate(&self) -> Result<(), SimError> {
        if !(self.base_period.is_finite() && self.base_period > 0.0) {
            return Err(SimError::Config(format!("base period must be positive, got {}", self.base_period)));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(SimError::Config(format!("jitter must lie in [0, 1), got {}", self.jitter)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PerturbationKind {
    AddDevice { position: (f64, f64), sensors: Sensors },
    RemoveDevice(DeviceId),
    MoveDevice(DeviceId, (f64, f64)),
    SetSensor(DeviceId, String, Value),
    /// Remove `count` random devices outside `protect`, skipping any whose
    /// removal would disconnect the network when `keep_connected` is set.
    RemoveRandom { count: usize, keep_connected: bool, protect: Vec<DeviceId> },
}

/// An environment change applied between rounds, before any event at time
/// `at` or later.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub at: f64,
    pub kind: PerturbationKind,
}

/// Replace every number in rep state by a uniform draw from `[0, scale)` and
/// every boolean by a coin flip, after each of a device's first two rounds
/// (the same draw both times).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct WarmStart {
    pub scale: f64,
}

/// Stop once every live device has had `quiet_rounds` consecutive rounds
/// whose result moved by at most `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub quiet_rounds: usize,
    pub epsilon: f64,
}

/// Program, environment and scheduler state of one simulation.
pub struct World {
    program: Arc<Program>,
    env: Environment,
    nbrs: BTreeMap<DeviceId, BTreeMap<DeviceId, f64>>,
    schedule: Schedule,
    budget: f64,
    schedule_rng: ChaCha8Rng,
    warm_rng: ChaCha8Rng,
    /// Random rep states drawn at a device's first round, re-applied after
    /// its second.
    warm_states: BTreeMap<DeviceId, BTreeMap<Path, Value>>,
    perturb_rng: ChaCha8Rng,
    warm: Option<WarmStart>,
    stop: Option<StopRule>,
    perturbations: VecDeque<Perturbation>,
    own: BTreeMap<DeviceId, Arc<Export>>,
    inbox: BTreeMap<DeviceId, BTreeMap<DeviceId, Arc<Export>>>,
    staged: Vec<(DeviceId, Arc<Export>)>,
    seq: BTreeMap<DeviceId, u64>,
    last_result: BTreeMap<DeviceId, Value>,
    quiet: BTreeMap<DeviceId, usize>,
    queue: BTreeSet<(OrderedFloat<f64>, DeviceId)>,
    sync_round: u64,
    sync_pending: VecDeque<DeviceId>,
    trace: Trace,
    finished: bool,
}

impl World {
    /// `rounds` bounds simulated time to `rounds * base_period`.
    pub fn new(program: Arc<Program>, env: Environment, schedule: Schedule, rounds: u64, seed: u64) -> Result<Self, SimError> {
        schedule.validate()?;
        let stream = |s: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(s);
            r
        };
        let mut world = Self {
            program,
            nbrs: env.neighbour_table(),
            inbox: env.ids().map(|d| (d, BTreeMap::new())).collect(),
            trace: Trace::new(env.clone(), schedule.base_period, false),
            env,
            schedule,
            budget: rounds as f64 * schedule.base_period,
            schedule_rng: stream(STREAM_SCHEDULE),
            warm_rng: stream(STREAM_WARM_START),
            warm_states: BTreeMap::new(),
            perturb_rng: stream(STREAM_PERTURBATION),
            warm: None,
            stop: None,
            perturbations: VecDeque::new(),
            own: BTreeMap::new(),
            staged: Vec::new(),
            seq: BTreeMap::new(),
            last_result: BTreeMap::new(),
            quiet: BTreeMap::new(),
            queue: BTreeSet::new(),
            sync_round: 0,
            sync_pending: VecDeque::new(),
            finished: false,
        };
        if schedule.mode == ScheduleMode::FairAsync {
            let ids: Vec<DeviceId> = world.env.ids().collect();
            for d in ids {
                let offset = world.schedule_rng.gen::<f64>() * schedule.base_period;
                world.queue.insert((OrderedFloat(offset), d));
            }
        }
        Ok(world)
    }

    pub fn with_perturbations(mut self, mut list: Vec<Perturbation>) -> Self {
        list.sort_by(|a, b| a.at.total_cmp(&b.at));
        self.perturbations = list.into();
        self
    }

    pub fn with_warm_start(mut self, warm: WarmStart) -> Self {
        self.warm = Some(warm);
        self
    }

    pub fn with_stop_rule(mut self, stop: StopRule) -> Self {
        self.stop = Some(stop);
        self
    }

    pub fn recording_exports(mut self) -> Self {
        self.trace.exports = Some(Vec::new());
        self
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Latest export of a device, if it has fired.
    pub fn export_of(&self, d: DeviceId) -> Option<&Export> {
        self.own.get(&d).map(|e| &**e)
    }

    /// Runs to completion.
    pub fn run(mut self) -> Result<Trace, SimError> {
        while !self.finished {
            if self.schedule.mode == ScheduleMode::Synchronous && self.sync_pending.is_empty() {
                self.sync_round_parallel()?;
            } else {
                self.step()?;
            }
        }
        Ok(self.trace)
    }

    /// Fires the next scheduled device round. Returns `false` once the run is
    /// over.
    pub fn step(&mut self) -> Result<bool, SimError> {
        if self.finished {
            return Ok(false);
        }
        match self.schedule.mode {
            ScheduleMode::Synchronous => {
                if self.sync_pending.is_empty() && !self.begin_sync_round() {
                    return Ok(false);
                }
                let d = self.sync_pending.pop_front().expect("round has pending devices");
                let time = self.sync_time();
                let out = self.evaluate(d, time)?;
                self.commit(d, time, out);
                if self.sync_pending.is_empty() {
                    self.end_sync_round();
                }
            }
            ScheduleMode::FairAsync => {
                let Some((time, d)) = self.queue.pop_first() else {
                    self.finish(StopReason::Empty, self.trace.end_time);
                    return Ok(false);
                };
                let time = time.0;
                if time >= self.budget {
                    self.finish(StopReason::Budget, self.budget);
                    return Ok(false);
                }
                self.apply_due(time);
                if !self.env.contains(d) {
                    return Ok(!self.finished);
                }
                let out = self.evaluate(d, time)?;
                self.commit(d, time, out);
                let p = self.schedule.base_period;
                let next = time + p * (1.0 + self.schedule.jitter * (2.0 * self.schedule_rng.gen::<f64>() - 1.0));
                self.queue.insert((OrderedFloat(next), d));
                if self.is_stabilized() {
                    self.finish(StopReason::Stabilized, time);
                }
            }
        }
        Ok(!self.finished)
    }

    fn sync_time(&self) -> f64 {
        self.sync_round as f64 * self.schedule.base_period
    }

    /// Applies due perturbations and queues every live device. Returns false
    /// when the budget is spent.
    fn begin_sync_round(&mut self) -> bool {
        let time = self.sync_time();
        if time >= self.budget {
            self.finish(StopReason::Budget, self.budget);
            return false;
        }
        self.apply_due(time);
        self.sync_pending = self.env.ids().collect();
        if self.sync_pending.is_empty() {
            self.finish(StopReason::Empty, time);
            return false;
        }
        true
    }

    fn end_sync_round(&mut self) {
        for (from, export) in std::mem::take(&mut self.staged) {
            self.deliver(from, export);
        }
        let time = self.sync_time();
        self.sync_round += 1;
        if self.is_stabilized() {
            self.finish(StopReason::Stabilized, time);
        }
    }

    /// One synchronous round with device evaluations in parallel. Produces
    /// the same trace as stepping device by device.
    fn sync_round_parallel(&mut self) -> Result<(), SimError> {
        if !self.begin_sync_round() {
            return Ok(());
        }
        let time = self.sync_time();
        let ids: Vec<DeviceId> = self.sync_pending.drain(..).collect();
        let this = &*self;
        let outputs: Vec<Result<RoundOutput, SimError>> = ids.par_iter().map(|d| this.evaluate(*d, time)).collect();
        for (d, out) in ids.into_iter().zip(outputs) {
            self.commit(d, time, out?);
        }
        self.end_sync_round();
        Ok(())
    }

    fn evaluate(&self, d: DeviceId, time: f64) -> Result<RoundOutput, SimError> {
        let device = self.env.device(d).expect("only live devices fire");
        let received = &self.inbox[&d];
        let ranges = &self.nbrs[&d];
        let ctx = RoundContext {
            device: d,
            sensors: &device.sensors,
            prev_export: self.own.get(&d).map(|e| &**e),
            nbr_exports: received.iter().map(|(k, e)| (*k, &**e)).collect(),
            nbr_ranges: received.keys().map(|k| (*k, ranges[k])).collect(),
        };
        let seq = self.seq.get(&d).copied().unwrap_or(0);
        eval_round(&self.program, &ctx).map_err(|error| SimError::Runtime { event: Event { device: d, time, seq }, error: Box::new(error) })
    }

    fn commit(&mut self, d: DeviceId, time: f64, out: RoundOutput) {
        let RoundOutput { result, mut export } = out;
        let seq = self.seq.entry(d).or_insert(0);
        let event = Event { device: d, time, seq: *seq };
        *seq += 1;
        if let Some(warm) = self.warm {
            // A `nbr` inside a `rep` shares the state from before the update,
            // so rounds r and r+1 feed neighbours through separate chains.
            // Installing the same random state after the first two rounds
            // starts both chains from it.
            match event.seq {
                0 => {
                    let rng = &mut self.warm_rng;
                    let mut drawn = BTreeMap::new();
                    export.map_rep_states(|path, v| {
                        let r = randomise(v, warm.scale, rng);
                        drawn.insert(path.clone(), r.clone());
                        r
                    });
                    self.warm_states.insert(d, drawn);
                }
                1 => {
                    if let Some(drawn) = self.warm_states.remove(&d) {
                        export.map_rep_states(|path, v| drawn.get(path).cloned().unwrap_or_else(|| v.clone()));
                    }
                }
                _ => {}
            }
        }
        let quiet = self.quiet.entry(d).or_insert(0);
        match (self.last_result.get(&d), self.stop) {
            (Some(prev), Some(rule)) if prev.within(&result, rule.epsilon) => *quiet += 1,
            _ => *quiet = 0,
        }
        self.trace.records.push(TraceRecord { event, result: result.clone(), digest: export.digest() });
        if let Some(exports) = &mut self.trace.exports {
            exports.push(export.clone());
        }
        self.trace.end_time = time;
        self.last_result.insert(d, result);
        let export = Arc::new(export);
        self.own.insert(d, Arc::clone(&export));
        match self.schedule.mode {
            ScheduleMode::Synchronous => self.staged.push((d, export)),
            ScheduleMode::FairAsync => self.deliver(d, export),
        }
    }

    fn deliver(&mut self, from: DeviceId, export: Arc<Export>) {
        let Some(nbrs) = self.nbrs.get(&from) else { return };
        for n in nbrs.keys() {
            if let Some(inbox) = self.inbox.get_mut(n) {
                inbox.insert(from, Arc::clone(&export));
            }
        }
    }

    fn is_stabilized(&self) -> bool {
        let Some(rule) = self.stop else { return false };
        self.perturbations.is_empty() && !self.env.is_empty() && self.env.ids().all(|d| self.quiet.get(&d).copied().unwrap_or(0) >= rule.quiet_rounds)
    }

    fn finish(&mut self, reason: StopReason, time: f64) {
        self.finished = true;
        self.trace.stop = reason;
        self.trace.end_time = self.trace.end_time.max(time.min(self.budget));
    }

    fn apply_due(&mut self, time: f64) {
        let mut changed = false;
        while self.perturbations.front().is_some_and(|p| p.at <= time) {
            let p = self.perturbations.pop_front().unwrap();
            self.apply(p.kind, time);
            changed = true;
        }
        if !changed {
            return;
        }
        self.nbrs = self.env.neighbour_table();
        let live: BTreeSet<DeviceId> = self.env.ids().collect();
        self.inbox.retain(|d, _| live.contains(d));
        self.own.retain(|d, _| live.contains(d));
        self.queue.retain(|(_, d)| live.contains(d));
        for d in &live {
            let nbrs = &self.nbrs[d];
            self.inbox.entry(*d).or_default().retain(|from, _| nbrs.contains_key(from));
        }
        self.quiet.clear();
        self.trace.epochs.push((time, self.env.clone()));
    }

    fn apply(&mut self, kind: PerturbationKind, time: f64) {
        // Perturbations naming devices that no longer exist are dropped: the
        // scenario already lost that device to an earlier change.
        match kind {
            PerturbationKind::AddDevice { position, sensors } => {
                if let Ok(d) = self.env.add_device(position, sensors) {
                    if self.schedule.mode == ScheduleMode::FairAsync {
                        let first = time + self.schedule_rng.gen::<f64>() * self.schedule.base_period;
                        self.queue.insert((OrderedFloat(first), d));
                    }
                }
            }
            PerturbationKind::RemoveDevice(d) => {
                let _ = self.env.remove_device(d);
            }
            PerturbationKind::MoveDevice(d, to) => {
                let _ = self.env.move_device(d, to);
            }
            PerturbationKind::SetSensor(d, name, value) => {
                let _ = self.env.set_sensor(d, &name, value);
            }
            PerturbationKind::RemoveRandom { count, keep_connected, protect } => {
                let mut candidates: Vec<DeviceId> = self.env.ids().filter(|d| !protect.contains(d)).collect();
                candidates.shuffle(&mut self.perturb_rng);
                let mut removed = 0;
                for d in candidates {
                    if removed == count {
                        break;
                    }
                    let mut trial = self.env.clone();
                    trial.remove_device(d).expect("candidate is live");
                    if !keep_connected || trial.is_connected() {
                        self.env = trial;
                        removed += 1;
                    }
                }
            }
        }
    }
}

fn randomise(v: &Value, scale: f64, rng: &mut ChaCha8Rng) -> Value {
    match v {
        Value::Num(_) => Value::Num(rng.gen::<f64>() * scale),
        Value::Bool(_) => Value::Bool(rng.gen()),
        Value::Tuple(items) => Value::tuple(items.iter().map(|x| randomise(x, scale, rng))),
        other => other.clone(),
    }
}
