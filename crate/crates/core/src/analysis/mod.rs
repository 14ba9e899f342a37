//! Property checks over simulated traces: stabilisation, uniqueness of the
//! stabilised state, consistency across device densities, the shape of
//! recovery after a perturbation, scheduler fairness, and how fast
//! information crosses a network.

mod dynamics;
mod fairness;
pub mod oracle;
mod propagation;
mod snapshot;
mod stabilization;
mod sweep;
mod uniqueness;

pub use dynamics::{dynamics_metrics, DynamicsMetrics};
pub use fairness::{check_fairness, FairnessReport};
pub use propagation::diameter_in_rounds;
pub use snapshot::Snapshot;
pub use stabilization::{detect_stabilization, StabilizationReport, ASYMPTOTIC_EPSILON, EXACT_EPSILON};
pub use sweep::{density_sweep, probe_grid, ConsistencyReport, DensityResult};
pub use uniqueness::{check_uniqueness, UniquenessReport};
