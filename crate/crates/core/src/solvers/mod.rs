//! Average-cost solvers for the truncated MDP and its auxiliary variants.
//!
//! All solvers share one action rule: transmit only when it is strictly
//! better by more than [`TIE_TOLERANCE`]; exact ties stay silent.

mod brute;
mod evaluate;
mod grid;
mod pi;
pub mod reference;
mod rvi;
mod spi;

pub use brute::{brute_force_switching_search, BRUTE_FORCE_LIMIT};
pub use evaluate::{policy_evaluation, PolicyValue};
pub use grid::{grid_search_baseline, GridCandidate, GridOutcome};
pub use pi::classical_policy_iteration;
pub use rvi::{relative_value_iteration, RviOptions};
pub use spi::{structured_policy_iteration, SpiOptions};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mdp::{Action, FiniteMdp};
use crate::policy::Policy;

/// Two Q-values closer than this are treated as a tie.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub solver: String,
    pub iterations: usize,
    pub residual: f64,
    /// Per-iteration convergence measure (span for RVI, number of changed
    /// actions for policy iteration).
    pub trace: Vec<f64>,
    /// States examined by each structured improvement sweep.
    pub improvement_visits: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Optimal average cost per stage.
    pub gain: f64,
    /// Relative values with `bias[reference] == 0`.
    pub bias: Vec<f64>,
    pub policy: Policy,
    pub reference: usize,
    pub diagnostics: Diagnostics,
}

impl SolveResult {
    pub fn iterations(&self) -> usize {
        self.diagnostics.iterations
    }

    pub fn residual(&self) -> f64 {
        self.diagnostics.residual
    }
}

/// `max_s |L + h(s) − min_a (l(s,a) + Σ P h)|`
pub fn bellman_residual(mdp: &FiniteMdp, gain: f64, bias: &[f64]) -> f64 {
    (0..mdp.len())
        .map(|s| {
            let best = Action::BOTH
                .iter()
                .map(|&a| mdp.q_value(s, a, bias))
                .fold(f64::INFINITY, f64::min);
            (gain + bias[s] - best).abs()
        })
        .fold(0.0, f64::max)
}

/// Greedy action at `s` for relative values `bias`, preferring silence on
/// ties.
pub fn greedy_action(mdp: &FiniteMdp, s: usize, bias: &[f64]) -> Action {
    let idle = mdp.q_value(s, Action::Idle, bias);
    let transmit = mdp.q_value(s, Action::Transmit, bias);
    if transmit < idle - TIE_TOLERANCE {
        Action::Transmit
    } else {
        Action::Idle
    }
}

pub fn greedy_policy(mdp: &FiniteMdp, bias: &[f64]) -> Policy {
    Policy::new((0..mdp.len()).map(|s| greedy_action(mdp, s, bias)).collect())
}

/// Improvement rule for policy iteration. When the evaluated policy has
/// several recurrent classes with different gains, the gain comparison
/// takes precedence over the relative values. A tie keeps `current`, which
/// rules out cycling; pass `None` to break ties toward silence.
pub(crate) fn improved_action(
    mdp: &FiniteMdp,
    s: usize,
    value: &PolicyValue,
    uniform_gain: bool,
    current: Option<Action>,
) -> Action {
    if !uniform_gain {
        let idle = mdp.expect(s, Action::Idle, &value.gains);
        let transmit = mdp.expect(s, Action::Transmit, &value.gains);
        if transmit < idle - TIE_TOLERANCE {
            return Action::Transmit;
        }
        if idle < transmit - TIE_TOLERANCE {
            return Action::Idle;
        }
    }
    let idle = mdp.q_value(s, Action::Idle, &value.bias);
    let transmit = mdp.q_value(s, Action::Transmit, &value.bias);
    if transmit < idle - TIE_TOLERANCE {
        Action::Transmit
    } else if idle < transmit - TIE_TOLERANCE {
        Action::Idle
    } else {
        current.unwrap_or(Action::Idle)
    }
}

/// Replaces a converged policy by its silence-on-ties counterpart when that
/// policy is still optimal, i.e. it has the same gain everywhere and its own
/// relative values satisfy the optimality equation.
pub(crate) fn prefer_silence(
    mdp: &FiniteMdp,
    converged: (Policy, PolicyValue),
    candidate: Policy,
) -> Result<(Policy, PolicyValue)> {
    if candidate == converged.0 {
        return Ok(converged);
    }
    let value = policy_evaluation(mdp, &candidate, converged.1.reference)?;
    let same_gain = value
        .gains
        .iter()
        .zip(&converged.1.gains)
        .all(|(a, b)| (a - b).abs() <= TIE_TOLERANCE);
    if same_gain
        && value.has_uniform_gain(TIE_TOLERANCE)
        && bellman_residual(mdp, value.gain, &value.bias) <= 10.0 * TIE_TOLERANCE
    {
        Ok((candidate, value))
    } else {
        Ok(converged)
    }
}
