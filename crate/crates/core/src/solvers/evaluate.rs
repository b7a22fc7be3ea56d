use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph;
use crate::mdp::FiniteMdp;
use crate::policy::Policy;

/// Gain and relative values of a fixed policy.
///
/// For a unichain policy `gains` is constant. When the policy splits the
/// state space into several recurrent classes each class gets its own gain
/// and transient states inherit the absorption-weighted mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValue {
    /// Average cost from the reference state.
    pub gain: f64,
    pub gains: Vec<f64>,
    /// Relative values, zero at the reference state.
    pub bias: Vec<f64>,
    pub recurrent_classes: Vec<Vec<usize>>,
    pub reference: usize,
}

impl PolicyValue {
    pub fn is_unichain(&self) -> bool {
        self.recurrent_classes.len() == 1
    }

    /// Whether all states share one gain up to `tol`.
    pub fn has_uniform_gain(&self, tol: f64) -> bool {
        let (lo, hi) = self
            .gains
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &g| {
                (lo.min(g), hi.max(g))
            });
        hi - lo <= tol
    }
}

/// Solves `L + h(s) = l(s, π(s)) + Σ P h(s')` with `h(reference) = 0`.
pub fn policy_evaluation(mdp: &FiniteMdp, policy: &Policy, reference: usize) -> Result<PolicyValue> {
    let n = mdp.len();
    if policy.len() != n {
        return Err(Error::Structural(format!(
            "policy covers {} states, model has {n}",
            policy.len()
        )));
    }
    if reference >= n {
        return Err(Error::StateOutOfRange(format!("reference index {reference}")));
    }
    let adjacency = mdp.induced_adjacency(policy.actions());
    let classes = graph::closed_classes(&adjacency);

    let mut gains = vec![f64::NAN; n];
    let mut bias = vec![0.0; n];
    let mut in_class = vec![false; n];
    for class in &classes {
        let anchor = if class.binary_search(&reference).is_ok() {
            reference
        } else {
            class[0]
        };
        let (g, h) = solve_class(mdp, policy, class, anchor)?;
        for (k, &s) in class.iter().enumerate() {
            gains[s] = g;
            bias[s] = h[k];
            in_class[s] = true;
        }
    }

    let transient: Vec<usize> = (0..n).filter(|&s| !in_class[s]).collect();
    if !transient.is_empty() {
        solve_transient(mdp, policy, &transient, &classes, &mut gains, &mut bias)?;
    }

    let shift = bias[reference];
    if shift != 0.0 {
        bias.iter_mut().for_each(|h| *h -= shift);
    }
    Ok(PolicyValue {
        gain: gains[reference],
        gains,
        bias,
        recurrent_classes: classes,
        reference,
    })
}

/// Unichain evaluation restricted to one closed class, with the `anchor`
/// column standing in for the gain.
fn solve_class(mdp: &FiniteMdp, policy: &Policy, class: &[usize], anchor: usize) -> Result<(f64, Vec<f64>)> {
    let n = class.len();
    let local = |s: usize| class.binary_search(&s).ok();
    let anchor_local = local(anchor).expect("anchor in class");
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for (r, &s) in class.iter().enumerate() {
        let act = policy.action(s);
        a[(r, r)] += 1.0;
        for &(t, p) in mdp.row(s, act) {
            let c = local(t).expect("closed class leaks");
            a[(r, c)] -= p;
        }
        b[r] = mdp.cost(s, act);
    }
    for r in 0..n {
        a[(r, anchor_local)] = 1.0;
    }
    let x = a.lu().solve(&b).ok_or_else(|| {
        Error::Evaluation(format!(
            "singular system on a recurrent class of {n} states; the class is not a single communicating set"
        ))
    })?;
    let gain = x[anchor_local];
    let mut h: Vec<f64> = x.iter().copied().collect();
    h[anchor_local] = 0.0;
    Ok((gain, h))
}

/// Transient gains are mixtures of class gains weighted by absorption
/// probabilities. Those are normalized to sum to one before mixing, since
/// nearly closed transient sets make the linear solve ill-conditioned.
fn solve_transient(
    mdp: &FiniteMdp,
    policy: &Policy,
    transient: &[usize],
    classes: &[Vec<usize>],
    gains: &mut [f64],
    bias: &mut [f64],
) -> Result<()> {
    let n = transient.len();
    let local = |s: usize| transient.binary_search(&s).ok();
    let mut class_of = vec![usize::MAX; mdp.len()];
    for (c, class) in classes.iter().enumerate() {
        for &s in class {
            class_of[s] = c;
        }
    }
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut entry = DMatrix::<f64>::zeros(n, classes.len());
    let mut recurrent_bias = DVector::<f64>::zeros(n);
    for (r, &s) in transient.iter().enumerate() {
        for &(t, p) in mdp.row(s, policy.action(s)) {
            match local(t) {
                Some(c) => a[(r, c)] -= p,
                None => {
                    entry[(r, class_of[t])] += p;
                    recurrent_bias[r] += p * bias[t];
                }
            }
        }
    }
    let lu = a.clone().lu();
    let absorption = lu.solve(&entry).ok_or_else(|| {
        Error::Evaluation("transient block is singular; some states never reach a recurrent class".into())
    })?;
    let class_gain: Vec<f64> = classes.iter().map(|c| gains[c[0]]).collect();
    let mut g = DVector::<f64>::zeros(n);
    for r in 0..n {
        let weights: Vec<f64> = (0..classes.len()).map(|c| absorption[(r, c)].max(0.0)).collect();
        let total: f64 = weights.iter().sum();
        g[r] = weights.iter().zip(&class_gain).map(|(w, x)| w * x).sum::<f64>() / total;
    }
    let mut bias_rhs = recurrent_bias;
    for (r, &s) in transient.iter().enumerate() {
        bias_rhs[r] += mdp.cost(s, policy.action(s)) - g[r];
    }
    let mut h = lu
        .solve(&bias_rhs)
        .ok_or_else(|| Error::Evaluation("transient bias system is singular".into()))?;
    // One step of iterative refinement.
    let residual = &bias_rhs - &a * &h;
    if let Some(correction) = lu.solve(&residual) {
        h += correction;
    }
    for (r, &s) in transient.iter().enumerate() {
        gains[s] = g[r];
        bias[s] = h[r];
    }
    Ok(())
}
