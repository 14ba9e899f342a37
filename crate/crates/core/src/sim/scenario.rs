use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::{build_topology, Environment, Perturbation, PerturbationKind, Schedule, SimError, StopRule, Topology, Trace, WarmStart, World};
use crate::blocks;
use crate::engine::{DeviceId, Sensors, Value};
use crate::lang::Program;

pub const SCENARIO_VERSION: u32 = 1;

/// A reproducible experiment: program, network, schedule, inputs and
/// environment changes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Main expression, compiled with the standard library in scope.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    /// Program file, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program_file: Option<String>,
    pub topology: Topology,
    pub radius: f64,
    #[serde(default = "Schedule::synchronous")]
    pub schedule: Schedule,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sensors: SensorSpec,
    #[serde(default)]
    pub perturbations: Vec<PerturbationSpec>,
    /// Simulated time budget, in base periods.
    pub rounds: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_when_stabilized: Option<StopSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<WarmStart>,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(skip)]
    base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SensorSpec {
    /// Values every device starts with.
    #[serde(default)]
    pub defaults: BTreeMap<String, Json>,
    /// Overrides keyed by device id.
    #[serde(default)]
    pub devices: BTreeMap<String, BTreeMap<String, Json>>,
    /// Overrides for the device nearest to a point.
    #[serde(default)]
    pub nearest: Vec<NearestSensors>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct NearestSensors {
    pub point: (f64, f64),
    pub values: BTreeMap<String, Json>,
}

/// A device named by id or as the one nearest to a point of the initial
/// layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeviceRef {
    Id(u32),
    Nearest { nearest: (f64, f64) },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum PerturbationSpec {
    AddDevice {
        at: f64,
        position: (f64, f64),
        #[serde(default)]
        sensors: BTreeMap<String, Json>,
    },
    RemoveDevice {
        at: f64,
        device: DeviceRef,
    },
    MoveDevice {
        at: f64,
        device: DeviceRef,
        to: (f64, f64),
    },
    SetSensor {
        at: f64,
        device: DeviceRef,
        sensor: String,
        value: Json,
    },
    #[serde(rename_all = "camelCase")]
    RemoveRandom {
        at: f64,
        fraction: f64,
        #[serde(default)]
        keep_connected: bool,
        #[serde(default)]
        protect: Vec<DeviceRef>,
    },
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct StopSpec {
    /// Defaults to four rounds per hop of diameter of the initial network.
    #[serde(default)]
    pub quiet_rounds: Option<usize>,
    #[serde(default)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Outputs {
    /// Trace CSV file name inside the output directory.
    #[serde(default)]
    pub csv: Option<String>,
    /// Full export dump file name inside the output directory.
    #[serde(default)]
    pub exports: Option<String>,
}

/// Reference field the stabilised snapshot should match.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum OracleSpec {
    /// Shortest-path length to the nearest device whose boolean `sensor` holds.
    Dijkstra { sensor: String },
    /// Hop count to the nearest device whose boolean `sensor` holds.
    Bfs { sensor: String },
    /// Minimum of numeric `sensor` over the device's connected component.
    ComponentMin { sensor: String },
    /// Sum of numeric `sensor` over the device's connected component.
    ComponentSum { sensor: String },
    Constant { value: Json },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum RadiusPolicy {
    Fixed { radius: f64 },
    /// Radius giving about `degree` expected neighbours at every density.
    ConstantDegree { degree: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SweepReference {
    /// Each density is compared with the next denser one.
    #[default]
    Successive,
    /// Every density is compared with the densest one.
    Highest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SweepSpec {
    pub densities: Vec<usize>,
    pub width: f64,
    pub height: f64,
    pub radius_policy: RadiusPolicy,
    #[serde(default = "three")]
    pub replications: usize,
    /// Probe grid pitch; defaults to a quarter of the communication radius.
    #[serde(default)]
    pub probe_pitch: Option<f64>,
    #[serde(default)]
    pub reference: SweepReference,
}

fn three() -> usize {
    3
}

fn to_value(json: &Json) -> Result<Value, SimError> {
    Value::from_json(json).map_err(SimError::Config)
}

fn to_sensors(map: &BTreeMap<String, Json>) -> Result<Sensors, SimError> {
    map.iter().map(|(k, v)| Ok((k.clone(), to_value(v)?))).collect()
}

impl RadiusPolicy {
    pub fn radius(&self, n: usize, width: f64, height: f64) -> f64 {
        match *self {
            RadiusPolicy::Fixed { radius } => radius,
            RadiusPolicy::ConstantDegree { degree } => (degree * width * height / (std::f64::consts::PI * n as f64)).sqrt(),
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)?;
        let mut s = Self::from_json(&text)?;
        s.base_dir = path.parent().map(Path::to_path_buf);
        Ok(s)
    }

    /// Directory that relative program paths are resolved against.
    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = Some(dir.into());
        self
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.version != SCENARIO_VERSION {
            return Err(SimError::Config(format!("unsupported scenario version {} (expected {SCENARIO_VERSION})", self.version)));
        }
        if self.program.is_some() == self.program_file.is_some() {
            return Err(SimError::Config("exactly one of `program` and `programFile` must be given".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.densities.is_empty() || sweep.densities.contains(&0) || sweep.replications == 0 {
                return Err(SimError::Config("sweep needs positive densities and at least one replication".into()));
            }
        }
        Ok(())
    }

    /// Source text and where it came from, for diagnostics.
    pub fn program_source(&self) -> Result<(String, String), SimError> {
        match (&self.program, &self.program_file) {
            (Some(src), _) => Ok((src.clone(), "<scenario>".into())),
            (None, Some(file)) => {
                let path = self.base_dir.as_deref().map_or_else(|| PathBuf::from(file), |d| d.join(file));
                Ok((std::fs::read_to_string(&path)?, path.display().to_string()))
            }
            (None, None) => Err(SimError::Config("scenario has no program".into())),
        }
    }

    pub fn compile(&self) -> Result<Arc<Program>, SimError> {
        let (src, origin) = self.program_source()?;
        blocks::compile(&src).map(Arc::new).map_err(|error| SimError::Parse { origin, error })
    }

    /// Initial environment with sensors assigned.
    pub fn environment(&self, seed: u64) -> Result<Environment, SimError> {
        self.environment_for(&self.topology, self.radius, seed)
    }

    /// Environment for another layout, with this scenario's sensor rules.
    pub fn environment_for(&self, topology: &Topology, radius: f64, seed: u64) -> Result<Environment, SimError> {
        let mut env = build_topology(topology, radius, seed)?;
        let defaults = to_sensors(&self.sensors.defaults)?;
        let ids: Vec<DeviceId> = env.ids().collect();
        for d in &ids {
            for (k, v) in &defaults {
                env.set_sensor(*d, k, v.clone())?;
            }
        }
        for (id, values) in &self.sensors.devices {
            let d = DeviceId(id.parse().map_err(|_| SimError::Config(format!("sensor override for non-numeric device id `{id}`")))?);
            for (k, v) in to_sensors(values)? {
                env.set_sensor(d, &k, v)?;
            }
        }
        for n in &self.sensors.nearest {
            let d = env.nearest(n.point).expect("environment is not empty");
            for (k, v) in to_sensors(&n.values)? {
                env.set_sensor(d, &k, v)?;
            }
        }
        Ok(env)
    }

    fn resolve(env: &Environment, r: &DeviceRef) -> Result<DeviceId, SimError> {
        match r {
            DeviceRef::Id(i) if env.contains(DeviceId(*i)) => Ok(DeviceId(*i)),
            DeviceRef::Id(i) => Err(SimError::UnknownDevice(DeviceId(*i))),
            DeviceRef::Nearest { nearest } => Ok(env.nearest(*nearest).expect("environment is not empty")),
        }
    }

    /// Concrete perturbations against the initial environment.
    pub fn perturbations(&self, env: &Environment) -> Result<Vec<Perturbation>, SimError> {
        let defaults = to_sensors(&self.sensors.defaults)?;
        self.perturbations
            .iter()
            .map(|p| {
                Ok(match p {
                    PerturbationSpec::AddDevice { at, position, sensors } => {
                        let mut s = defaults.clone();
                        s.extend(to_sensors(sensors)?);
                        Perturbation { at: *at, kind: PerturbationKind::AddDevice { position: *position, sensors: s } }
                    }
                    PerturbationSpec::RemoveDevice { at, device } => Perturbation { at: *at, kind: PerturbationKind::RemoveDevice(Self::resolve(env, device)?) },
                    PerturbationSpec::MoveDevice { at, device, to } => Perturbation { at: *at, kind: PerturbationKind::MoveDevice(Self::resolve(env, device)?, *to) },
                    PerturbationSpec::SetSensor { at, device, sensor, value } => Perturbation {
                        at: *at,
                        kind: PerturbationKind::SetSensor(Self::resolve(env, device)?, sensor.clone(), to_value(value)?),
                    },
                    PerturbationSpec::RemoveRandom { at, fraction, keep_connected, protect } => {
                        if !(0.0..=1.0).contains(fraction) {
                            return Err(SimError::Config(format!("removal fraction must lie in [0, 1], got {fraction}")));
                        }
                        Perturbation {
                            at: *at,
                            kind: PerturbationKind::RemoveRandom {
                                count: (fraction * env.len() as f64).round() as usize,
                                keep_connected: *keep_connected,
                                protect: protect.iter().map(|r| Self::resolve(env, r)).collect::<Result<_, _>>()?,
                            },
                        }
                    }
                })
            })
            .collect()
    }

    /// Quiet-round stop rule, with the default window filled in from `env`.
    pub fn stop_rule(&self, env: &Environment) -> Option<StopRule> {
        self.stop_when_stabilized.map(|s| StopRule { quiet_rounds: s.quiet_rounds.unwrap_or_else(|| default_quiet_rounds(env)), epsilon: s.epsilon })
    }

    /// A ready-to-run world on `env`, drawing schedule and warm-start
    /// randomness from `run_seed`.
    pub fn world_in(&self, program: Arc<Program>, env: Environment, run_seed: u64, warm: Option<WarmStart>) -> Result<World, SimError> {
        let perturbations = self.perturbations(&env)?;
        let stop = self.stop_rule(&env);
        let mut world = World::new(program, env, self.schedule, self.rounds, run_seed)?.with_perturbations(perturbations);
        if let Some(stop) = stop {
            world = world.with_stop_rule(stop);
        }
        if let Some(warm) = warm.or(self.warm_start) {
            world = world.with_warm_start(warm);
        }
        if self.outputs.exports.is_some() {
            world = world.recording_exports();
        }
        Ok(world)
    }

    pub fn world(&self, seed: u64) -> Result<World, SimError> {
        self.world_in(self.compile()?, self.environment(seed)?, seed, None)
    }

    pub fn run(&self, seed: u64) -> Result<Trace, SimError> {
        self.world(seed)?.run()
    }
}

/// Twice the time information needs to cross the network. A value crosses
/// one hop every two rounds (`nbr` inside `rep` shares the state from
/// before the update), so this is four rounds per hop of diameter.
pub fn default_quiet_rounds(env: &Environment) -> usize {
    (4 * env.hop_diameter()).max(1)
}
