use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Environment, SimError};
use crate::engine::Sensors;

/// Resampling attempts for `UniformRandom` with `require_connected`.
const MAX_PLACEMENT_ATTEMPTS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum Topology {
    /// Devices on the x axis, `spacing` apart.
    Line { n: usize, spacing: f64 },
    /// Row-major lattice; device `r * cols + c` sits at `(c, r) * spacing`.
    Grid { rows: usize, cols: usize, spacing: f64 },
    /// `n` devices uniform in `[0, width] x [0, height]`.
    #[serde(rename_all = "camelCase")]
    UniformRandom {
        n: usize,
        width: f64,
        height: f64,
        #[serde(default)]
        require_connected: bool,
    },
}

impl Topology {
    pub fn device_count(&self) -> usize {
        match self {
            Topology::Line { n, .. } | Topology::UniformRandom { n, .. } => *n,
            Topology::Grid { rows, cols, .. } => rows * cols,
        }
    }

    /// Bounding rectangle of the placement area.
    pub fn extent(&self) -> (f64, f64) {
        match *self {
            Topology::Line { n, spacing } => (spacing * n.saturating_sub(1) as f64, 0.0),
            Topology::Grid { rows, cols, spacing } => (spacing * cols.saturating_sub(1) as f64, spacing * rows.saturating_sub(1) as f64),
            Topology::UniformRandom { width, height, .. } => (width, height),
        }
    }
}

fn positive(name: &str, x: f64) -> Result<(), SimError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(SimError::Topology(format!("{name} must be positive, got {x}")))
    }
}

/// Places devices; deterministic for a given seed.
pub fn build_topology(topology: &Topology, radius: f64, seed: u64) -> Result<Environment, SimError> {
    if topology.device_count() == 0 {
        return Err(SimError::Topology("topology has no devices".into()));
    }
    let mut env = Environment::new(radius)?;
    match *topology {
        Topology::Line { n, spacing } => {
            positive("spacing", spacing)?;
            for i in 0..n {
                env.add_device((i as f64 * spacing, 0.0), Sensors::new())?;
            }
        }
        Topology::Grid { rows, cols, spacing } => {
            positive("spacing", spacing)?;
            for r in 0..rows {
                for c in 0..cols {
                    env.add_device((c as f64 * spacing, r as f64 * spacing), Sensors::new())?;
                }
            }
        }
        Topology::UniformRandom { n, width, height, require_connected } => {
            positive("width", width)?;
            positive("height", height)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for attempt in 0..MAX_PLACEMENT_ATTEMPTS {
                rng.set_stream(attempt);
                let mut candidate = Environment::new(radius)?;
                for _ in 0..n {
                    candidate.add_device((rng.gen::<f64>() * width, rng.gen::<f64>() * height), Sensors::new())?;
                }
                if !require_connected || candidate.is_connected() {
                    return Ok(candidate);
                }
            }
            return Err(SimError::Topology(format!(
                "no connected placement of {n} devices in {width}x{height} with radius {radius} after {MAX_PLACEMENT_ATTEMPTS} attempts"
            )));
        }
    }
    Ok(env)
}
