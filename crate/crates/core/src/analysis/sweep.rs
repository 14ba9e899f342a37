use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::detect_stabilization;
use crate::sim::{default_quiet_rounds, Scenario, SimError, SweepReference, SweepSpec, Topology};

const STREAM_SWEEP_SEEDS: u64 = 5;

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DensityResult {
    pub devices: usize,
    pub radius: f64,
    /// Mean absolute difference to the reference field over the probe grid;
    /// `None` for the last density in successive mode.
    pub discrepancy: Option<f64>,
    /// Mean probed field value.
    pub mean_value: f64,
    /// Replications that could not be placed connected.
    pub disconnected: usize,
    /// Replications that did not stabilise within the budget.
    pub unstable: usize,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConsistencyReport {
    pub reference: SweepReference,
    pub probe_pitch: f64,
    pub densities: Vec<DensityResult>,
    /// Discrepancies strictly decrease with density.
    pub strictly_decreasing: bool,
    /// Discrepancies decrease with at most one inversion.
    pub mostly_decreasing: bool,
    /// Human-readable label; finite sweeps are evidence, not proof.
    pub verdict: String,
}

impl ConsistencyReport {
    pub fn discrepancies(&self) -> Vec<f64> {
        self.densities.iter().filter_map(|d| d.discrepancy).collect()
    }

    pub fn mean_values(&self) -> Vec<f64> {
        self.densities.iter().map(|d| d.mean_value).collect()
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:>8} {:>8} {:>13} {:>11} {:>6} {:>6}\n", "devices", "radius", "discrepancy", "mean", "disc.", "unst.");
        for d in &self.densities {
            let disc = d.discrepancy.map_or("-".to_string(), |x| format!("{x:.6}"));
            out.push_str(&format!("{:>8} {:>8.4} {:>13} {:>11.6} {:>6} {:>6}\n", d.devices, d.radius, disc, d.mean_value, d.disconnected, d.unstable));
        }
        out.push_str(&format!("verdict: {}\n", self.verdict));
        out
    }
}

/// Probe points covering `[0, width] x [0, height]` at spacing `pitch`.
pub fn probe_grid(width: f64, height: f64, pitch: f64) -> Vec<(f64, f64)> {
    let nx = (width / pitch).floor() as usize + 1;
    let ny = (height / pitch).floor() as usize + 1;
    (0..ny).flat_map(|j| (0..nx).map(move |i| (i as f64 * pitch, j as f64 * pitch))).collect()
}

/// Runs the scenario's program on uniform random layouts of increasing size
/// over a fixed region, samples each stabilised field on a probe grid by
/// nearest device, and compares the probed fields across densities.
pub fn density_sweep(scenario: &Scenario, spec: &SweepSpec, seed: u64) -> Result<ConsistencyReport, SimError> {
    let program = scenario.compile()?;
    let pitch = spec.probe_pitch.unwrap_or_else(|| {
        let densest = *spec.densities.iter().max().expect("validated non-empty");
        spec.radius_policy.radius(densest, spec.width, spec.height) / 4.0
    });
    let probes = probe_grid(spec.width, spec.height, pitch);

    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    seeds.set_stream(STREAM_SWEEP_SEEDS);
    let mut jobs: Vec<(usize, usize, u64)> = Vec::new();
    for (k, n) in spec.densities.iter().enumerate() {
        for _ in 0..spec.replications {
            jobs.push((k, *n, seeds.gen()));
        }
    }

    // Probed field per (density index, replication); None when disconnected
    // or unstable.
    let results = jobs
        .par_iter()
        .map(|&(k, n, s)| -> Result<(usize, Result<Vec<f64>, &'static str>), SimError> {
            let radius = spec.radius_policy.radius(n, spec.width, spec.height);
            let topo = Topology::UniformRandom { n, width: spec.width, height: spec.height, require_connected: true };
            let env = match scenario.environment_for(&topo, radius, s) {
                Ok(env) => env,
                Err(SimError::Topology(_)) => return Ok((k, Err("disconnected"))),
                Err(e) => return Err(e),
            };
            let rule = scenario.stop_rule(&env);
            let quiet = rule.map_or_else(|| default_quiet_rounds(&env), |r| r.quiet_rounds);
            let eps = rule.map_or(0.0, |r| r.epsilon);
            let trace = scenario.world_in(program.clone(), env.clone(), s, None)?.run()?;
            let report = detect_stabilization(&trace, trace.last_change(), quiet, eps);
            let Some(snap) = report.snapshot else { return Ok((k, Err("unstable"))) };
            let env = trace.final_environment();
            let field: Option<Vec<f64>> = probes.iter().map(|p| env.nearest(*p).and_then(|d| snap.values.get(&d)).and_then(|v| v.as_num())).collect();
            Ok((k, field.ok_or("non-numeric")))
        })
        .collect::<Result<Vec<_>, SimError>>()?;

    let m = spec.densities.len();
    let mut fields: Vec<Vec<Vec<f64>>> = vec![Vec::new(); m];
    let mut disconnected = vec![0; m];
    let mut unstable = vec![0; m];
    for (k, r) in results {
        match r {
            Ok(f) => fields[k].push(f),
            Err("disconnected") => disconnected[k] += 1,
            Err(_) => unstable[k] += 1,
        }
    }
    // replication-averaged probe field per density
    let mean_field: Vec<Option<Vec<f64>>> = fields
        .iter()
        .map(|reps| (!reps.is_empty()).then(|| (0..probes.len()).map(|p| reps.iter().map(|f| f[p]).sum::<f64>() / reps.len() as f64).collect()))
        .collect();
    let mad = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| if x == y { 0.0 } else { (x - y).abs() }).sum::<f64>() / a.len() as f64;

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|k| spec.densities[*k]);
    let densest = *order.last().unwrap();
    let mut densities = Vec::with_capacity(m);
    for (pos, &k) in order.iter().enumerate() {
        let reference = match spec.reference {
            SweepReference::Highest => Some(densest),
            SweepReference::Successive => order.get(pos + 1).copied(),
        };
        let discrepancy = match (reference, &mean_field[k]) {
            (Some(r), Some(f)) => mean_field[r].as_ref().map(|g| mad(f, g)),
            _ => None,
        };
        let mean_value = mean_field[k].as_ref().map_or(f64::NAN, |f| f.iter().sum::<f64>() / f.len() as f64);
        let n = spec.densities[k];
        densities.push(DensityResult {
            devices: n,
            radius: spec.radius_policy.radius(n, spec.width, spec.height),
            discrepancy,
            mean_value,
            disconnected: disconnected[k],
            unstable: unstable[k],
        });
    }

    let trend: Vec<f64> = match spec.reference {
        // the densest run is its own reference and always scores zero
        SweepReference::Highest => densities[..m - 1].iter().filter_map(|d| d.discrepancy).collect(),
        SweepReference::Successive => densities.iter().filter_map(|d| d.discrepancy).collect(),
    };
    let complete = densities.iter().all(|d| d.disconnected == 0 && d.unstable == 0);
    let strictly_decreasing = complete && trend.windows(2).all(|w| w[1] < w[0]);
    let inversions = trend.windows(2).filter(|w| w[1] >= w[0]).count();
    let mostly_decreasing = complete && inversions <= 1 && trend.first() > trend.last();
    let already_equal = complete && trend.iter().all(|d| *d == 0.0);
    let verdict = if already_equal {
        "consistent-with eventual consistency: the field is identical at every density"
    } else if strictly_decreasing || (mostly_decreasing && trend.len() > 2) {
        "consistent-with eventual consistency: discrepancy shrinks as density grows"
    } else {
        "not consistent-with eventual consistency: discrepancy does not shrink with density"
    }
    .to_string();
    Ok(ConsistencyReport { reference: spec.reference, probe_pitch: pitch, densities, strictly_decreasing, mostly_decreasing, verdict })
}
