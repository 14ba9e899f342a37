use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{detect_stabilization, Snapshot};
use crate::engine::DeviceId;
use crate::sim::{default_quiet_rounds, Scenario, SimError, WarmStart};

const STREAM_RUN_SEEDS: u64 = 4;

#[derive(Debug, Clone)]
pub struct UniquenessReport {
    pub unique: bool,
    /// Stabilised snapshot of each run; `None` for runs that did not settle.
    pub snapshots: Vec<Option<Snapshot>>,
    /// Devices whose value differs between some pair of runs.
    pub divergent: Vec<DeviceId>,
    /// Largest numeric spread between runs, infinite for non-numeric
    /// disagreement.
    pub max_divergence: f64,
    pub epsilon: f64,
}

impl UniquenessReport {
    pub fn all_stabilized(&self) -> bool {
        self.snapshots.iter().all(Option::is_some)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "unique": self.unique,
            "runs": self.snapshots.len(),
            "stabilizedRuns": self.snapshots.iter().filter(|s| s.is_some()).count(),
            "divergentDevices": self.divergent,
            "maxDivergence": if self.max_divergence.is_finite() { serde_json::json!(self.max_divergence) } else { serde_json::json!("infinity") },
            "epsilon": self.epsilon,
        })
    }
}

/// Runs `scenario` `runs` times on one network, each with its own schedule
/// randomness and randomised initial rep state, and compares the stabilised
/// snapshots device by device.
pub fn check_uniqueness(scenario: &Scenario, runs: usize, seed: u64, warm: WarmStart, epsilon: f64) -> Result<UniquenessReport, SimError> {
    let program = scenario.compile()?;
    let env = scenario.environment(seed)?;
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    seeds.set_stream(STREAM_RUN_SEEDS);
    let run_seeds: Vec<u64> = (0..runs).map(|_| seeds.gen()).collect();
    let quiet = scenario.stop_rule(&env).map_or_else(|| default_quiet_rounds(&env), |r| r.quiet_rounds);

    let snapshots = run_seeds
        .par_iter()
        .map(|s| {
            let trace = scenario.world_in(program.clone(), env.clone(), *s, Some(warm))?.run()?;
            let report = detect_stabilization(&trace, trace.last_change(), quiet, epsilon);
            Ok(report.snapshot)
        })
        .collect::<Result<Vec<Option<Snapshot>>, SimError>>()?;

    let settled: Vec<&Snapshot> = snapshots.iter().flatten().collect();
    let mut divergent = Vec::new();
    let mut max_divergence: f64 = 0.0;
    if let Some(first) = settled.first() {
        for (d, v) in &first.values {
            let mut differs = false;
            for other in &settled[1..] {
                match other.values.get(d) {
                    Some(w) => {
                        max_divergence = max_divergence.max(v.distance(w).unwrap_or(f64::INFINITY));
                        differs |= !v.within(w, epsilon);
                    }
                    None => {
                        max_divergence = f64::INFINITY;
                        differs = true;
                    }
                }
            }
            if differs {
                divergent.push(*d);
            }
        }
        if settled[1..].iter().any(|o| o.values.len() != first.values.len()) {
            max_divergence = f64::INFINITY;
        }
    }
    let unique = settled.len() == snapshots.len() && divergent.is_empty() && max_divergence.is_finite();
    Ok(UniquenessReport { unique, snapshots, divergent, max_divergence, epsilon })
}
