use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Action, SystemState, TruncatedMdp};
use crate::policy::{EvaluablePolicy, Threshold};

/// Number of batches used for the confidence interval.
pub const BATCHES: u64 = 20;

/// Two-sided 97.5% Student-t quantile with `BATCHES − 1` degrees of freedom.
const T_QUANTILE_19: f64 = 2.093_024_054_408_263;

/// RNG stream identifiers; each random ingredient draws from its own
/// stream so that adding randomness to the policy does not shift the
/// source or channel realizations.
pub const SOURCE_STREAM: u64 = 0;
pub const CHANNEL_STREAM: u64 = 1;
pub const POLICY_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub mean_cost: f64,
    /// 95% half-width from batch means.
    pub half_width_95: f64,
    pub horizon: u64,
    pub seed: u64,
    pub transmissions_per_slot: f64,
    /// Fraction of slots spent in an estimation error.
    pub error_fraction: f64,
    pub mean_aoce: f64,
    pub mean_aoi: f64,
    pub mean_aoii: f64,
}

impl SimulationReport {
    /// Whether `exact` lies within `k` half-widths of the simulated mean.
    pub fn agrees_with(&self, exact: f64, k: f64) -> bool {
        (self.mean_cost - exact).abs() <= k * self.half_width_95
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Simulates the closed loop from `(1,1,0)` for `horizon` slots with the
/// untruncated AoCE. Stationary policies act at ages beyond the truncation
/// as they do at the saturated age.
pub fn simulate(mdp: &TruncatedMdp, policy: &EvaluablePolicy, horizon: u64, seed: u64) -> Result<SimulationReport> {
    if horizon < BATCHES {
        return Err(Error::Parameter(format!("horizon must be at least {BATCHES} slots")));
    }
    if let EvaluablePolicy::Stationary(p) = policy {
        if p.len() != mdp.len() {
            return Err(Error::Structural("policy does not match the model".into()));
        }
    }
    let source = mdp.source();
    let profile = mdp.profile();
    let lambda = mdp.lambda();
    let p_success = mdp.p_success();
    let m = source.len();
    let rows: Vec<WeightedIndex<f64>> = (0..m)
        .map(|i| WeightedIndex::new(source.matrix()[i].iter().copied()).expect("stochastic row"))
        .collect();

    let mut source_rng = stream(seed, SOURCE_STREAM);
    let mut channel_rng = stream(seed, CHANNEL_STREAM);
    let mut policy_rng = stream(seed, POLICY_STREAM);

    let mut state = SystemState::synced(0);
    let mut prev_source = 0usize;
    let mut aoi: u64 = 1;
    let mut aoii: u64 = 0;

    let batch_len = horizon / BATCHES;
    let used = batch_len * BATCHES;
    let mut batch_means = Vec::with_capacity(BATCHES as usize);
    let mut batch_sum = 0.0;
    let mut transmissions: u64 = 0;
    let mut error_slots: u64 = 0;
    let (mut aoce_sum, mut aoi_sum, mut aoii_sum) = (0.0, 0.0, 0.0);

    for t in 0..used {
        let action = match policy {
            EvaluablePolicy::Stationary(p) => p.action_at(mdp, state),
            EvaluablePolicy::Reactive => transmit_if(state.source != prev_source),
            EvaluablePolicy::Randomized { probability } => transmit_if(policy_rng.random_bool(*probability)),
            EvaluablePolicy::Periodic { period } => transmit_if(period.is_some_and(|d| t % u64::from(d) == 0)),
            EvaluablePolicy::Aoi { threshold } => transmit_if(triggers(*threshold, aoi)),
            EvaluablePolicy::Aoii { thresholds } => {
                transmit_if(!state.is_synced() && triggers(thresholds.get(state.source, state.estimate), aoii))
            }
        };

        batch_sum += profile.state_cost(state) + if action.is_transmit() { lambda } else { 0.0 };
        aoce_sum += f64::from(state.age);
        aoi_sum += aoi as f64;
        aoii_sum += aoii as f64;
        if !state.is_synced() {
            error_slots += 1;
        }

        let next_source = rows[state.source].sample(&mut source_rng);
        let mut next_estimate = state.estimate;
        if action.is_transmit() {
            transmissions += 1;
            if channel_rng.random::<f64>() < p_success {
                next_estimate = state.source;
                aoi = 0;
            }
        }
        aoi += 1;
        let next_age = if next_source == next_estimate {
            0
        } else if (next_source, next_estimate) == (state.source, state.estimate) {
            state.age.saturating_add(1)
        } else {
            1
        };
        aoii = if next_source == next_estimate { 0 } else { aoii + 1 };
        prev_source = state.source;
        state = SystemState::new(next_source, next_estimate, next_age);

        if (t + 1) % batch_len == 0 {
            batch_means.push(batch_sum / batch_len as f64);
            batch_sum = 0.0;
        }
    }

    let k = batch_means.len() as f64;
    let mean = batch_means.iter().sum::<f64>() / k;
    let var = batch_means.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let slots = used as f64;
    Ok(SimulationReport {
        mean_cost: mean,
        half_width_95: T_QUANTILE_19 * (var / k).sqrt(),
        horizon: used,
        seed,
        transmissions_per_slot: transmissions as f64 / slots,
        error_fraction: error_slots as f64 / slots,
        mean_aoce: aoce_sum / slots,
        mean_aoi: aoi_sum / slots,
        mean_aoii: aoii_sum / slots,
    })
}

fn transmit_if(condition: bool) -> Action {
    if condition {
        Action::Transmit
    } else {
        Action::Idle
    }
}

fn triggers(threshold: Threshold, age: u64) -> bool {
    threshold.value().is_some_and(|t| age >= u64::from(t))
}
