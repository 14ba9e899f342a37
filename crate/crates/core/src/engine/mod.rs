//! Single-device round evaluation.
//!
//! A round maps (program, sensors, own previous export, neighbours' latest
//! exports) to a result value and a fresh export. Alignment works on paths:
//! every node pushes its slot when entered, and applying a closure or a
//! definition pushes the function's tag. A `nbr` at path `p` reads only the
//! values neighbours wrote at exactly `p`, so devices that applied different
//! functions at the same call site never exchange values.

mod eval;
mod export;
mod value;

use std::collections::BTreeMap;
use std::fmt;

pub use export::{Export, Path, PathKey, SlotKind};
pub use value::{Closure, DeviceId, Env, Function, NbrMap, Value};

use crate::lang::Program;

pub type Sensors = BTreeMap<String, Value>;

/// Everything one event may observe.
#[derive(Debug, Clone)]
pub struct RoundContext<'a> {
    pub device: DeviceId,
    pub sensors: &'a Sensors,
    /// This device's export from its previous round.
    pub prev_export: Option<&'a Export>,
    /// Latest export of each current neighbour, self excluded.
    pub nbr_exports: BTreeMap<DeviceId, &'a Export>,
    /// Distance to each neighbour in `nbr_exports`, same key set.
    pub nbr_ranges: BTreeMap<DeviceId, f64>,
}

impl<'a> RoundContext<'a> {
    pub fn isolated(device: DeviceId, sensors: &'a Sensors) -> Self {
        Self { device, sensors, prev_export: None, nbr_exports: BTreeMap::new(), nbr_ranges: BTreeMap::new() }
    }
}

#[derive(Debug, Clone)]
pub struct RoundOutput {
    pub result: Value,
    pub export: Export,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Fault {
    #[error("type error: {0}")]
    Type(String),
    #[error("unbound sensor `{0}`")]
    UnboundSensor(String),
    #[error("cannot apply a {0}")]
    NotAFunction(&'static str),
    #[error("`{function}` expects {expected} argument(s), got {got}")]
    Arity { function: String, expected: usize, got: usize },
    #[error("neighbour field escapes into {0}")]
    NbrMapEscape(&'static str),
    #[error("call depth limit exceeded")]
    RecursionLimit,
    #[error("`{0}` is not allowed inside a function passed to a higher-order builtin")]
    LocalOnly(&'static str),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("program has no main expression")]
    NoMain,
    #[error("{0}")]
    Nested(Box<RuntimeError>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeError {
    pub fault: Fault,
    pub path: Path,
}

impl fmt::Display for RuntimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at {}: {}", self.path, self.fault)
    }
}

impl std::error::Error for RuntimeError {}

/// Evaluates one round of `program` for the device described by `ctx`.
/// Pure: equal inputs give bit-identical outputs.
pub fn eval_round(program: &Program, ctx: &RoundContext<'_>) -> Result<RoundOutput, RuntimeError> {
    eval::run(program, ctx)
}

#[cfg(test)]
mod tests;
