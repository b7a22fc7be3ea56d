use crate::error::{Error, Result};
use crate::mdp::{Action, TruncatedMdp};
use crate::policy::{Policy, SwitchingPolicy, Threshold};

use super::{
    bellman_residual, improved_action, policy_evaluation, prefer_silence, Diagnostics, PolicyValue, SolveResult,
    TIE_TOLERANCE,
};

#[derive(Debug, Clone)]
pub struct SpiOptions {
    /// Starting thresholds; `None` starts from transmit-on-every-error.
    pub initial: Option<SwitchingPolicy>,
    pub max_iter: usize,
}

impl Default for SpiOptions {
    fn default() -> Self {
        Self {
            initial: None,
            max_iter: 1_000,
        }
    }
}

/// Policy iteration whose improvement step walks each error's ages upward
/// and stops at the first age where transmitting wins; every older age of
/// that error transmits as well. Synced states are never given a
/// transmission.
pub fn structured_policy_iteration(mdp: &TruncatedMdp, reference: usize, options: SpiOptions) -> Result<SolveResult> {
    let m = mdp.num_sources();
    let initial = options
        .initial
        .unwrap_or_else(|| SwitchingPolicy::uniform(m, Threshold::At(1)));
    let mut policy = initial.expand(mdp)?;
    let kernel = mdp.kernel();
    let mut trace = Vec::new();
    let mut visits = Vec::new();

    for iteration in 1..=options.max_iter {
        let value = policy_evaluation(kernel, &policy, reference)?;
        let uniform = value.has_uniform_gain(TIE_TOLERANCE);

        let (next, visited) = structured_sweep(mdp, &value, uniform, Some(&policy));
        visits.push(visited);
        let changed = (0..mdp.len()).filter(|&s| next.action(s) != policy.action(s)).count();
        trace.push(changed as f64);

        if changed == 0 {
            let (silent, _) = structured_sweep(mdp, &value, uniform, None);
            let (policy, value) = prefer_silence(kernel, (policy, value), silent)?;
            let residual = bellman_residual(kernel, value.gain, &value.bias);
            return Ok(SolveResult {
                gain: value.gain,
                bias: value.bias,
                policy,
                reference,
                diagnostics: Diagnostics {
                    solver: "spi".into(),
                    iterations: iteration,
                    residual,
                    trace,
                    improvement_visits: visits,
                },
            });
        }
        policy = next;
    }
    Err(Error::NonConvergence {
        iterations: options.max_iter,
        residual: trace.last().copied().unwrap_or(f64::NAN),
    })
}

/// Walks each error's ages upward and switches to transmission from the
/// first age where it wins. Ties keep the action of `current`, or stay
/// silent when `current` is `None`.
fn structured_sweep(
    mdp: &TruncatedMdp,
    value: &PolicyValue,
    uniform: bool,
    current: Option<&Policy>,
) -> (Policy, usize) {
    let kernel = mdp.kernel();
    let mut next = Policy::never(mdp);
    let mut visited = 0;
    for block in mdp.blocks() {
        for k in 0..block.len {
            let s = block.start + k;
            visited += 1;
            let keep = current.map(|p| p.action(s));
            if improved_action(kernel, s, value, uniform, keep).is_transmit() {
                for t in s..block.start + block.len {
                    next.set(t, Action::Transmit);
                }
                break;
            }
        }
    }
    (next, visited)
}
