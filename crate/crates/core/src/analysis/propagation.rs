use std::sync::Arc;

use super::oracle::hop_counts;
use crate::blocks;
use crate::engine::{DeviceId, Value};
use crate::sim::{Environment, Schedule, SimError, World};

/// Diameter of a connected network measured in synchronous rounds: how many
/// rounds a gossiped value needs to get from one end of a longest shortest
/// path to the other. Measured by running `gossipMin` with a single low
/// value planted at one end.
pub fn diameter_in_rounds(env: &Environment) -> Result<u64, SimError> {
    if !env.is_connected() {
        return Err(SimError::Config("diameter in rounds needs a connected network".into()));
    }
    let mut ends = None;
    let mut best = -1.0;
    for d in env.ids() {
        for (e, h) in hop_counts(env, &[d]) {
            if h > best {
                best = h;
                ends = Some((d, e));
            }
        }
    }
    let Some((from, to)) = ends else { return Ok(0) };
    let program = blocks::compile(&format!("gossipMin(mux(selfId() == {}, 0, 1))", from.0)).map_err(|e| SimError::Parse { origin: "<probe>".into(), error: e })?;
    let budget = 4 * (env.len() as u64 + 2);
    let trace = World::new(Arc::new(program), env.clone(), Schedule::synchronous(), budget, 0)?.run()?;
    let first_zero = |dev: DeviceId| trace.records.iter().find(|r| r.event.device == dev && r.result == Value::Num(0.0)).map(|r| r.event.time);
    match (first_zero(from), first_zero(to)) {
        (Some(a), Some(b)) => Ok((b - a).round() as u64),
        _ => Err(SimError::Config("probe value did not cross the network within the budget".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{build_topology, Topology};

    #[test]
    fn line_takes_two_rounds_per_hop() {
        for n in [1, 2, 5, 9] {
            let env = build_topology(&Topology::Line { n, spacing: 1.0 }, 1.2, 0).unwrap();
            assert_eq!(diameter_in_rounds(&env).unwrap(), 2 * (n as u64 - 1));
        }
    }
}
