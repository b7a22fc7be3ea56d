use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mdp::TruncatedMdp;
use crate::policy::{SwitchingPolicy, Threshold};

use super::policy_evaluation;

/// Largest number of threshold matrices the exhaustive search will try.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// Evaluates every threshold matrix with entries in `{1..τ_max, never}`
/// and returns the cheapest one (lowest enumeration index on ties) with
/// its average cost from the default reference state.
///
/// Errors whose block holds fewer ages than `τ_max` only get the
/// thresholds that can fire inside the block, so no two candidates expand
/// to the same policy.
pub fn brute_force_switching_search(mdp: &TruncatedMdp, tau_max: u32) -> Result<(SwitchingPolicy, f64)> {
    if tau_max == 0 {
        return Err(Error::Parameter("tau_max must be at least 1".into()));
    }
    let options: Vec<Vec<Threshold>> = mdp
        .blocks()
        .iter()
        .map(|b| {
            let top = tau_max.min(b.len as u32);
            (1..=top)
                .map(Threshold::At)
                .chain(std::iter::once(Threshold::Never))
                .collect()
        })
        .collect();
    let count = options
        .iter()
        .try_fold(1u128, |acc, o| acc.checked_mul(o.len() as u128))
        .unwrap_or(u128::MAX);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::SearchTooLarge {
            count,
            limit: BRUTE_FORCE_LIMIT,
        });
    }

    let m = mdp.num_sources();
    let reference = mdp.default_reference();
    let decode = |mut index: u128| {
        let mut sw = SwitchingPolicy::uniform(m, Threshold::Never);
        for (b, opts) in mdp.blocks().iter().zip(&options) {
            let n = opts.len() as u128;
            sw.set(b.source, b.estimate, opts[(index % n) as usize]);
            index /= n;
        }
        sw
    };

    let best = (0..count as u64)
        .into_par_iter()
        .map(|index| {
            let sw = decode(u128::from(index));
            let policy = sw.expand(mdp)?;
            let value = policy_evaluation(mdp.kernel(), &policy, reference)?;
            Ok((value.gain, index))
        })
        .try_reduce(
            || (f64::INFINITY, u64::MAX),
            |a, b| Ok(if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a }),
        )?;
    Ok((decode(u128::from(best.1)), best.0))
}
