use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::TruncatedMdp;
use crate::policy::SwitchingPolicy;
use crate::significance::SignificanceProfile;
use crate::solvers::{structured_policy_iteration, SpiOptions};
use crate::source::SourceModel;

use super::stationary_distribution_from;

/// Gaps at or below this level are treated as round-off and left out of
/// the rate fit.
pub const GAP_NOISE_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub truncation: u32,
    pub optimal_cost: f64,
    /// `|L*(N) − L*(N_max)|`
    pub gap: f64,
    pub thresholds: SwitchingPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationSweep {
    pub points: Vec<SweepPoint>,
    /// `exp(slope)` of the least-squares line through `(N, ln gap)`.
    pub fitted_ratio: Option<f64>,
    /// Truncations that entered the fit.
    pub fitted_on: Vec<u32>,
    /// `max_{i ∈ X_ap} Q_ii · p_f`
    pub reference_ratio: f64,
}

/// Solves the truncated problem for every `N` in `truncations` and fits
/// the geometric decay of the gaps to the largest `N`.
pub fn truncation_sweep(
    source: &SourceModel,
    profile: &SignificanceProfile,
    p_success: f64,
    lambda: f64,
    truncations: &[u32],
) -> Result<TruncationSweep> {
    if truncations.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let p_fail = 1.0 - p_success;
    let report = profile.check_existence(source, p_fail);
    if !report.passed() {
        return Err(Error::ExistenceViolated(Box::new(report)));
    }
    let mut ns = truncations.to_vec();
    ns.sort_unstable();
    ns.dedup();

    let solved: Vec<(u32, f64, SwitchingPolicy)> = ns
        .par_iter()
        .map(|&n| {
            let mdp = TruncatedMdp::build(source.clone(), profile.clone(), p_success, lambda, n)?;
            let r = structured_policy_iteration(&mdp, mdp.default_reference(), SpiOptions::default())?;
            let sw = SwitchingPolicy::extract(&r.policy, &mdp)
                .map_err(|w| Error::Evaluation(format!("solver policy is not switching: {w}")))?;
            Ok((n, r.gain, sw))
        })
        .collect::<Result<_>>()?;

    let last = solved.last().expect("non-empty").1;
    let points: Vec<SweepPoint> = solved
        .into_iter()
        .map(|(n, cost, thresholds)| SweepPoint {
            truncation: n,
            optimal_cost: cost,
            gap: (cost - last).abs(),
            thresholds,
        })
        .collect();

    let usable: Vec<(f64, f64, u32)> = points[..points.len() - 1]
        .iter()
        .filter(|p| p.gap > GAP_NOISE_FLOOR)
        .map(|p| (f64::from(p.truncation), p.gap.ln(), p.truncation))
        .collect();
    let fitted_ratio = (usable.len() >= 2).then(|| {
        let k = usable.len() as f64;
        let mx = usable.iter().map(|u| u.0).sum::<f64>() / k;
        let my = usable.iter().map(|u| u.1).sum::<f64>() / k;
        let sxy: f64 = usable.iter().map(|u| (u.0 - mx) * (u.1 - my)).sum();
        let sxx: f64 = usable.iter().map(|u| (u.0 - mx).powi(2)).sum();
        (sxy / sxx).exp()
    });
    let reference_ratio = (0..source.len())
        .filter(|&i| source.has_self_transition(i))
        .map(|i| source.prob(i, i) * p_fail)
        .fold(0.0, f64::max);
    Ok(TruncationSweep {
        points,
        fitted_ratio,
        fitted_on: usable.iter().map(|u| u.2).collect(),
        reference_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapBound {
    pub source: usize,
    pub estimate: usize,
    /// Untruncated stationary mass of the boundary state `(i, j, N)`.
    pub boundary_mass: f64,
    /// `Σ_k ρ^k (g(k+N) − g(N))` with `ρ` the per-slot stay probability at
    /// the boundary.
    pub series: f64,
    /// `boundary_mass · D_ij · series`
    pub bound: f64,
}

/// Per-error cost difference between the untruncated and truncated chains
/// under a switching policy.
///
/// The boundary mass is rebuilt from the truncated stationary mass of the
/// age-1 state, which truncation leaves unchanged:
/// `μ(i,j,N) = μ(i,j,1) · Π_{δ<N} Q_ii · (p_f if δ ≥ τ_ij else 1)`.
pub fn truncation_gap_bound(mdp: &TruncatedMdp, policy: &SwitchingPolicy) -> Result<Vec<GapBound>> {
    let expanded = policy.expand(mdp)?;
    let mu = stationary_distribution_from(mdp.kernel(), &expanded, mdp.default_reference())?.mu;
    let n = mdp.truncation();
    let p_fail = mdp.p_fail();
    let source = mdp.source();
    let profile = mdp.profile();
    let mut out = Vec::new();
    for block in mdp.blocks() {
        let (i, j) = (block.source, block.estimate);
        if block.len == 1 && !source.has_self_transition(i) {
            out.push(GapBound {
                source: i,
                estimate: j,
                boundary_mass: 0.0,
                series: 0.0,
                bound: 0.0,
            });
            continue;
        }
        let q = source.prob(i, i);
        let tau = policy.get(i, j);
        let stay = |age: u32| if tau.triggers(age) { q * p_fail } else { q };
        let mut mass = mu[block.state_index(1)];
        for age in 1..n {
            mass *= stay(age);
        }
        let g = profile.age_function(i, j);
        let rho = stay(n);
        let limit = rho * g.growth_ratio_limit();
        if limit >= 1.0 {
            return Err(Error::DivergentSeries { i, j });
        }
        let base = g.value(n);
        let mut series = 0.0;
        let mut weight = 1.0;
        for k in 1..1_000_000u32 {
            weight *= rho;
            let term = weight * (g.value(n.saturating_add(k)) - base);
            series += term;
            let local = if term > 0.0 {
                rho * g.value(n.saturating_add(k + 1)) / g.value(n.saturating_add(k)).max(f64::MIN_POSITIVE)
            } else {
                limit
            };
            let ratio = local.max(limit);
            if ratio < 1.0 && term * ratio / (1.0 - ratio) < 1e-12 {
                break;
            }
            if !series.is_finite() {
                return Err(Error::DivergentSeries { i, j });
            }
        }
        out.push(GapBound {
            source: i,
            estimate: j,
            boundary_mass: mass,
            series,
            bound: mass * profile.weight(i, j) * series,
        });
    }
    Ok(out)
}
