use crate::error::{Error, Result};
use crate::mdp::FiniteMdp;
use crate::policy::Policy;

use super::{
    bellman_residual, improved_action, policy_evaluation, prefer_silence, Diagnostics, SolveResult, TIE_TOLERANCE,
};

/// Howard policy iteration over every state, starting from `initial`.
pub fn classical_policy_iteration(
    mdp: &FiniteMdp,
    reference: usize,
    initial: Policy,
    max_iter: usize,
) -> Result<SolveResult> {
    let mut policy = initial;
    let mut trace = Vec::new();
    for iteration in 1..=max_iter {
        let value = policy_evaluation(mdp, &policy, reference)?;
        let uniform = value.has_uniform_gain(TIE_TOLERANCE);
        let improved = Policy::new(
            (0..mdp.len())
                .map(|s| improved_action(mdp, s, &value, uniform, Some(policy.action(s))))
                .collect(),
        );
        let changed = (0..mdp.len())
            .filter(|&s| improved.action(s) != policy.action(s))
            .count();
        trace.push(changed as f64);
        if changed == 0 {
            let silent = Policy::new(
                (0..mdp.len())
                    .map(|s| improved_action(mdp, s, &value, uniform, None))
                    .collect(),
            );
            let (policy, value) = prefer_silence(mdp, (policy, value), silent)?;
            let residual = bellman_residual(mdp, value.gain, &value.bias);
            return Ok(SolveResult {
                gain: value.gain,
                bias: value.bias,
                policy,
                reference,
                diagnostics: Diagnostics {
                    solver: "pi".into(),
                    iterations: iteration,
                    residual,
                    trace,
                    improvement_visits: Vec::new(),
                },
            });
        }
        policy = improved;
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: trace.last().copied().unwrap_or(f64::NAN),
    })
}
