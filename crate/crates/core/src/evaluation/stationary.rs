use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph;
use crate::mdp::{Action, FiniteMdp, TruncatedMdp};
use crate::policy::Policy;
use crate::source::STOCHASTIC_TOL;

/// Stationary law of the chain induced by a policy, restricted to one
/// recurrent class.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    /// Probability of every state; zero outside `support`.
    pub mu: Vec<f64>,
    pub support: Vec<usize>,
}

impl StationaryDistribution {
    /// `‖μP − μ‖∞` for the chain the distribution was computed on.
    pub fn fixed_point_error(&self, mdp: &FiniteMdp, policy: &Policy) -> f64 {
        let mut next = vec![0.0; self.mu.len()];
        for (s, &w) in self.mu.iter().enumerate() {
            if w != 0.0 {
                for &(t, p) in mdp.row(s, policy.action(s)) {
                    next[t] += w * p;
                }
            }
        }
        next.iter()
            .zip(&self.mu)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `Σ μ(s) l(s, π(s))`
    pub fn expected_cost(&self, mdp: &FiniteMdp, policy: &Policy) -> f64 {
        self.support
            .iter()
            .map(|&s| self.mu[s] * mdp.cost(s, policy.action(s)))
            .sum()
    }
}

/// Stationary distribution of a policy whose induced chain has exactly one
/// recurrent class.
pub fn stationary_distribution(mdp: &FiniteMdp, policy: &Policy) -> Result<StationaryDistribution> {
    let classes = graph::closed_classes(&mdp.induced_adjacency(policy.actions()));
    match classes.len() {
        1 => solve_on_class(mdp, policy, &classes[0]),
        _ => Err(Error::MultipleRecurrentClasses(classes)),
    }
}

/// Stationary distribution of the recurrent class the chain settles in
/// when started from `start`. Errors if several classes are reachable.
pub fn stationary_distribution_from(mdp: &FiniteMdp, policy: &Policy, start: usize) -> Result<StationaryDistribution> {
    let adjacency = mdp.induced_adjacency(policy.actions());
    let reachable = graph::reachable_from(&adjacency, start);
    let classes: Vec<Vec<usize>> = graph::closed_classes(&adjacency)
        .into_iter()
        .filter(|c| reachable[c[0]])
        .collect();
    match classes.len() {
        1 => solve_on_class(mdp, policy, &classes[0]),
        _ => Err(Error::MultipleRecurrentClasses(classes)),
    }
}

fn solve_on_class(mdp: &FiniteMdp, policy: &Policy, class: &[usize]) -> Result<StationaryDistribution> {
    let n = class.len();
    let local = |s: usize| class.binary_search(&s).ok();
    // Rows of (Pᵀ − I) with the last equation replaced by Σμ = 1.
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (c, &s) in class.iter().enumerate() {
        a[(c, c)] -= 1.0;
        for &(t, p) in mdp.row(s, policy.action(s)) {
            let r = local(t).expect("closed class leaks");
            a[(r, c)] += p;
        }
    }
    let mut b = DVector::<f64>::zeros(n);
    for c in 0..n {
        a[(n - 1, c)] = 1.0;
    }
    b[n - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Evaluation("stationary system is singular".into()))?;
    let mut mu = vec![0.0; mdp.len()];
    for (c, &s) in class.iter().enumerate() {
        // Clamp round-off negatives.
        mu[s] = x[c].max(0.0);
    }
    let total: f64 = mu.iter().sum();
    if (total - 1.0).abs() > 1e3 * STOCHASTIC_TOL {
        mu.iter_mut().for_each(|v| *v /= total);
    }
    Ok(StationaryDistribution {
        mu,
        support: class.to_vec(),
    })
}

/// `Σ_s μ(s) l(s, π(s))` over the unique recurrent class.
pub fn average_cost_exact(mdp: &FiniteMdp, policy: &Policy) -> Result<f64> {
    Ok(stationary_distribution(mdp, policy)?.expected_cost(mdp, policy))
}

/// Long-run average cost of the reactive rule (transmit iff the source
/// state just changed), computed on the chain augmented with the previous
/// source state and started from `(x_prev = 1, (1,1,0))`.
pub fn reactive_average_cost(mdp: &TruncatedMdp) -> Result<f64> {
    let (chain, policy) = reactive_chain(mdp);
    let start = 0;
    Ok(stationary_distribution_from(&chain, &policy, start)?.expected_cost(&chain, &policy))
}

/// Augmented chain over `(x_prev, s)` at index `x_prev · |S^N| + s`, with
/// the reactive action baked into the idle row.
fn reactive_chain(mdp: &TruncatedMdp) -> (FiniteMdp, Policy) {
    let m = mdp.num_sources();
    let n = mdp.len();
    let kernel = mdp.kernel();
    let mut rows = Vec::with_capacity(m * n);
    let mut costs = Vec::with_capacity(m * n);
    for prev in 0..m {
        for s in 0..n {
            let state = mdp.state(s);
            let a = if state.source != prev {
                Action::Transmit
            } else {
                Action::Idle
            };
            let row = kernel
                .row(s, a)
                .iter()
                .map(|&(t, p)| (state.source * n + t, p))
                .collect::<Vec<_>>();
            rows.push(row);
            costs.push(kernel.cost(s, a));
        }
    }
    let chain = FiniteMdp::new([rows.clone(), rows], [costs.clone(), costs]).expect("well-formed");
    let policy = Policy::constant(m * n, Action::Idle);
    (chain, policy)
}
