//! Auxiliary MDPs whose optimal policies serve as age-of-information and
//! age-of-incorrect-information reference baselines.
//!
//! Both use a linear age cost `g(δ) = δ` and the same transmission cost as
//! the main problem. Their solutions are threshold rules on their own age
//! statistic, which the simulator tracks alongside the AoCE.

use crate::error::Result;
use crate::mdp::{Action, FiniteMdp, TruncatedMdp};
use crate::policy::{Policy, SwitchingPolicy, Threshold};

use super::{classical_policy_iteration, SolveResult};

/// Age-of-information chain on `δ ∈ {1..N}` (index `δ − 1`). A successful
/// delivery resets the age to 1; otherwise it grows, saturating at `N`.
pub fn aoi_mdp(p_success: f64, lambda: f64, truncation: u32) -> FiniteMdp {
    let n = truncation as usize;
    let mut idle = Vec::with_capacity(n);
    let mut transmit = Vec::with_capacity(n);
    for k in 0..n {
        let grown = (k + 1).min(n - 1);
        idle.push(vec![(grown, 1.0)]);
        let mut row = vec![(0, p_success), (grown, 1.0 - p_success)];
        if grown == 0 {
            row = vec![(0, 1.0)];
        }
        row.retain(|&(_, p)| p > 0.0);
        transmit.push(row);
    }
    let age_cost: Vec<f64> = (1..=n).map(|d| d as f64).collect();
    let transmit_cost = age_cost.iter().map(|c| c + lambda).collect();
    FiniteMdp::new([idle, transmit], [age_cost, transmit_cost]).expect("well-formed by construction")
}

/// Solved AoI rule: transmit once the age reaches `threshold`.
#[derive(Debug, Clone)]
pub struct AoiSolution {
    pub threshold: Threshold,
    pub result: SolveResult,
}

pub fn solve_aoi_reference(mdp: &TruncatedMdp) -> Result<AoiSolution> {
    let n = mdp.truncation();
    let aux = aoi_mdp(mdp.p_success(), mdp.lambda(), n);
    let result = classical_policy_iteration(&aux, 0, Policy::constant(aux.len(), Action::Transmit), 1_000)?;
    let threshold = (0..aux.len())
        .find(|&k| result.policy.action(k).is_transmit())
        .map_or(Threshold::Never, |k| Threshold::At(k as u32 + 1));
    Ok(AoiSolution { threshold, result })
}

/// Age-of-incorrect-information chain. States mirror the AoCE state space
/// except that every error keeps `N` ages and the age counts slots since
/// the last synced slot, so it keeps growing when the error changes.
///
/// The returned `TruncatedMdp`-style layout is: synced states `0..M`, then
/// error blocks `(i,j)` in lexicographic order with ages `1..=N`.
pub fn aoii_mdp(mdp: &TruncatedMdp) -> FiniteMdp {
    let m = mdp.num_sources();
    let n = mdp.truncation() as usize;
    let source = mdp.source();
    let p_s = mdp.p_success();
    let index = |i: usize, j: usize, age: usize| -> usize {
        if i == j {
            return i;
        }
        let block = i * (m - 1) + if j < i { j } else { j - 1 };
        m + block * n + age - 1
    };
    let total = m + m * (m - 1) * n;
    let mut rows = [Vec::with_capacity(total), Vec::with_capacity(total)];
    let mut costs = [Vec::with_capacity(total), Vec::with_capacity(total)];
    let mut states = Vec::with_capacity(total);
    states.extend((0..m).map(|i| (i, i, 0usize)));
    for i in 0..m {
        for j in (0..m).filter(|&j| j != i) {
            states.extend((1..=n).map(|a| (i, j, a)));
        }
    }
    for &(i, j, age) in &states {
        debug_assert_eq!(index(i, j, age), rows[0].len());
        for a in Action::BOTH {
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * m);
            let mut push = |k: usize, est: usize, p: f64| {
                if p <= 0.0 {
                    return;
                }
                let next_age = if k == est { 0 } else { (age + 1).min(n) };
                let t = index(k, est, next_age);
                match row.iter_mut().find(|(u, _)| *u == t) {
                    Some((_, q)) => *q += p,
                    None => row.push((t, p)),
                }
            };
            for k in 0..m {
                let q = source.prob(i, k);
                if a.is_transmit() && i != j {
                    push(k, i, q * p_s);
                    push(k, j, q * (1.0 - p_s));
                } else {
                    push(k, j, q);
                }
            }
            row.sort_by_key(|&(t, _)| t);
            rows[a.index()].push(row);
            let lambda = if a.is_transmit() { mdp.lambda() } else { 0.0 };
            costs[a.index()].push(age as f64 + lambda);
        }
    }
    FiniteMdp::new(rows, costs).expect("well-formed by construction")
}

/// Solved AoII rule: per-error thresholds on the age of incorrect
/// information.
#[derive(Debug, Clone)]
pub struct AoiiSolution {
    pub thresholds: SwitchingPolicy,
    pub result: SolveResult,
}

pub fn solve_aoii_reference(mdp: &TruncatedMdp) -> Result<AoiiSolution> {
    let m = mdp.num_sources();
    let n = mdp.truncation() as usize;
    let aux = aoii_mdp(mdp);
    let initial = Policy::new(
        (0..aux.len())
            .map(|s| if s < m { Action::Idle } else { Action::Transmit })
            .collect(),
    );
    let result = classical_policy_iteration(&aux, 0, initial, 1_000)?;
    let mut thresholds = SwitchingPolicy::uniform(m, Threshold::Never);
    let mut block = 0;
    for i in 0..m {
        for j in (0..m).filter(|&j| j != i) {
            let start = m + block * n;
            let first = (0..n).find(|&k| result.policy.action(start + k).is_transmit());
            thresholds.set(i, j, first.map_or(Threshold::Never, |k| Threshold::At(k as u32 + 1)));
            block += 1;
        }
    }
    Ok(AoiiSolution { thresholds, result })
}
