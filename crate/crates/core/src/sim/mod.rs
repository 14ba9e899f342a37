//! Deterministic network simulator.
//!
//! A [`World`] owns the environment (positions, proximity, sensors), the
//! scheduler and the latest export each device received from each current
//! neighbour. Firing a device assembles its round context from those exports,
//! evaluates one round and hands the new export to the neighbours. Every
//! random choice comes from seeded generators, so a scenario and a seed fix
//! the whole trace.

mod env;
mod scenario;
mod topology;
mod trace;
mod world;

pub use env::{Device, Environment};
pub use scenario::{default_quiet_rounds, DeviceRef, OracleSpec, Outputs, PerturbationSpec, RadiusPolicy, Scenario, SensorSpec, StopSpec, SweepReference, SweepSpec};
pub use topology::{build_topology, Topology};
pub use trace::{Event, StopReason, Trace, TraceRecord};
pub use world::{Perturbation, PerturbationKind, Schedule, ScheduleMode, StopRule, WarmStart, World};

use crate::engine::{DeviceId, RuntimeError};
use crate::lang::ParseError;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("topology: {0}")]
    Topology(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("unknown device {0}")]
    UnknownDevice(DeviceId),
    #[error("device {} round {} at t={}: {error}", event.device, event.seq, event.time)]
    Runtime { event: Event, error: Box<RuntimeError> },
    #[error("{origin}:{error}")]
    Parse { origin: String, error: ParseError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("scenario: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
