//! Exact stationary analysis, Monte Carlo simulation and truncation
//! studies of fixed policies.

mod simulate;
mod stationary;
mod truncation;

pub use simulate::{simulate, SimulationReport, BATCHES, CHANNEL_STREAM, POLICY_STREAM, SOURCE_STREAM};
pub use stationary::{
    average_cost_exact, reactive_average_cost, stationary_distribution, stationary_distribution_from,
    StationaryDistribution,
};
pub use truncation::{truncation_gap_bound, truncation_sweep, GapBound, SweepPoint, TruncationSweep, GAP_NOISE_FLOOR};

use crate::error::Result;
use crate::mdp::TruncatedMdp;
use crate::policy::EvaluablePolicy;

/// Long-run cost of a policy started from `(1,1,0)`: exact when the policy
/// lives on the truncated state space (or is the reactive rule), `None`
/// otherwise.
pub fn exact_cost(mdp: &TruncatedMdp, policy: &EvaluablePolicy) -> Result<Option<f64>> {
    match policy {
        EvaluablePolicy::Stationary(p) => {
            let d = stationary_distribution_from(mdp.kernel(), p, mdp.default_reference())?;
            Ok(Some(d.expected_cost(mdp.kernel(), p)))
        }
        EvaluablePolicy::Reactive => reactive_average_cost(mdp).map(Some),
        _ => Ok(None),
    }
}
