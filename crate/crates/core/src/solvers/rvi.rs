use crate::error::{Error, Result};
use crate::mdp::{Action, FiniteMdp};

use super::{bellman_residual, greedy_policy, Diagnostics, SolveResult};

#[derive(Debug, Clone, Copy)]
pub struct RviOptions {
    /// Stop once the span of successive relative-value differences drops
    /// to this level.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Self-loop weight `τ` of the aperiodicity transform
    /// `P ← τI + (1−τ)P`. Zero leaves the kernel untouched.
    pub aperiodicity: f64,
}

impl Default for RviOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iter: 100_000,
            aperiodicity: 0.0,
        }
    }
}

/// Relative value iteration normalized at `reference`.
pub fn relative_value_iteration(mdp: &FiniteMdp, reference: usize, options: RviOptions) -> Result<SolveResult> {
    let n = mdp.len();
    if reference >= n {
        return Err(Error::StateOutOfRange(format!("reference index {reference}")));
    }
    let tau = options.aperiodicity;
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::Parameter(format!("aperiodicity weight {tau} not in [0,1)")));
    }
    let mut h = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut trace = Vec::new();
    let mut gain = 0.0;
    let mut span = f64::INFINITY;
    let mut iterations = 0;
    while iterations < options.max_iter {
        iterations += 1;
        for (s, slot) in next.iter_mut().enumerate() {
            let best = Action::BOTH
                .iter()
                .map(|&a| mdp.cost(s, a) + (1.0 - tau) * mdp.expect(s, a, &h) + tau * h[s])
                .fold(f64::INFINITY, f64::min);
            *slot = best;
        }
        gain = next[reference];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in 0..n {
            let updated = next[s] - gain;
            let d = updated - h[s];
            lo = lo.min(d);
            hi = hi.max(d);
            h[s] = updated;
        }
        span = hi - lo;
        trace.push(span);
        if span <= options.tolerance {
            break;
        }
    }
    if span > options.tolerance {
        return Err(Error::NonConvergence {
            iterations,
            residual: span,
        });
    }
    // The transformed problem shares the gain; its relative values are
    // scaled by 1 − τ.
    if tau > 0.0 {
        h.iter_mut().for_each(|v| *v /= 1.0 - tau);
    }
    let policy = greedy_policy(mdp, &h);
    let residual = bellman_residual(mdp, gain, &h);
    Ok(SolveResult {
        gain,
        bias: h,
        policy,
        reference,
        diagnostics: Diagnostics {
            solver: "rvi".into(),
            iterations,
            residual,
            trace,
            improvement_visits: Vec::new(),
        },
    })
}
