//! Truncated system-state MDP: enumeration of `(source, estimate, age)`
//! triples, the controlled transition kernel, and per-stage costs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph;
use crate::significance::SignificanceProfile;
use crate::source::SourceModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Idle = 0,
    Transmit = 1,
}

impl Action {
    pub const BOTH: [Action; 2] = [Action::Idle, Action::Transmit];

    #[inline]
    pub fn is_transmit(self) -> bool {
        matches!(self, Action::Transmit)
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

/// `(X_t, X̂_t, Δ_t)` with 0-based source and estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SystemState {
    pub source: usize,
    pub estimate: usize,
    pub age: u32,
}

impl SystemState {
    pub const fn new(source: usize, estimate: usize, age: u32) -> Self {
        Self { source, estimate, age }
    }

    pub const fn synced(i: usize) -> Self {
        Self::new(i, i, 0)
    }

    #[inline]
    pub fn is_synced(&self) -> bool {
        self.source == self.estimate
    }
}

impl fmt::Display for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.source + 1, self.estimate + 1, self.age)
    }
}

/// Age of consecutive error after the pair moves from `(i, j)` at age
/// `prev_age` to `next`, saturated at `truncation`.
pub fn aoce_update(prev: (usize, usize, u32), next: (usize, usize), truncation: u32) -> u32 {
    let (i, j, age) = prev;
    let (ni, nj) = next;
    if ni == nj {
        0
    } else if (ni, nj) == (i, j) {
        age.saturating_add(1).min(truncation)
    } else {
        1
    }
}

/// Finite MDP with two actions, sparse rows and attached costs. Solvers
/// only see this type, so any cost or kernel can be plugged in.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    rows: [Vec<Vec<(usize, f64)>>; 2],
    costs: [Vec<f64>; 2],
}

impl FiniteMdp {
    /// `rows[a][s]` lists `(successor, probability)`; `costs[a][s]` is
    /// `l(s, a)`.
    pub fn new(rows: [Vec<Vec<(usize, f64)>>; 2], costs: [Vec<f64>; 2]) -> Result<Self> {
        let n = rows[0].len();
        if rows[1].len() != n || costs[0].len() != n || costs[1].len() != n {
            return Err(Error::Structural("action tables disagree on the state count".into()));
        }
        for row in rows.iter().flatten() {
            if let Some(&(t, _)) = row.iter().find(|(t, _)| *t >= n) {
                return Err(Error::Structural(format!("successor index {t} out of range")));
            }
        }
        Ok(Self { rows, costs })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.rows[0].len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.rows[0].is_empty()
    }

    #[inline]
    pub fn row(&self, s: usize, a: Action) -> &[(usize, f64)] {
        &self.rows[a.index()][s]
    }

    #[inline]
    pub fn cost(&self, s: usize, a: Action) -> f64 {
        self.costs[a.index()][s]
    }

    /// `l(s,a) + Σ P(s'|s,a) h(s')`
    #[inline]
    pub fn q_value(&self, s: usize, a: Action, h: &[f64]) -> f64 {
        self.cost(s, a) + self.expect(s, a, h)
    }

    /// `Σ P(s'|s,a) v(s')`
    #[inline]
    pub fn expect(&self, s: usize, a: Action, v: &[f64]) -> f64 {
        self.row(s, a).iter().map(|&(t, p)| p * v[t]).sum()
    }

    /// Successor lists of the chain induced by a per-state action choice.
    pub fn induced_adjacency(&self, actions: &[Action]) -> Vec<Vec<usize>> {
        (0..self.len())
            .map(|s| {
                self.row(s, actions[s])
                    .iter()
                    .filter(|(_, p)| *p > 0.0)
                    .map(|&(t, _)| t)
                    .collect()
            })
            .collect()
    }

    /// Deterministic 64-bit FNV-1a digest of the kernel and costs.
    pub fn checksum(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                hash ^= u64::from(*b);
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        feed(&(self.len() as u64).to_le_bytes());
        for a in Action::BOTH {
            for s in 0..self.len() {
                feed(&self.cost(s, a).to_bits().to_le_bytes());
                for &(t, p) in self.row(s, a) {
                    feed(&(t as u64).to_le_bytes());
                    feed(&p.to_bits().to_le_bytes());
                }
            }
        }
        hash
    }
}

/// Contiguous index range holding the ages of one error `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErrorBlock {
    pub source: usize,
    pub estimate: usize,
    pub start: usize,
    pub len: usize,
}

impl ErrorBlock {
    pub fn state_index(&self, age: u32) -> usize {
        debug_assert!(age >= 1 && age as usize <= self.len);
        self.start + age as usize - 1
    }
}

/// The AoCE MDP with ages capped at `truncation`.
///
/// State order: synced states `(i,i,0)` for `i = 0..M`, then one block per
/// error `(i,j)` in lexicographic order with ages ascending. Errors whose
/// source state has no self-transition hold a single age-1 state.
#[derive(Debug, Clone)]
pub struct TruncatedMdp {
    source: SourceModel,
    profile: SignificanceProfile,
    p_success: f64,
    lambda: f64,
    truncation: u32,
    states: Vec<SystemState>,
    blocks: Vec<ErrorBlock>,
    block_of: Vec<Vec<Option<usize>>>,
    kernel: FiniteMdp,
}

impl TruncatedMdp {
    pub fn build(
        source: SourceModel,
        profile: SignificanceProfile,
        p_success: f64,
        lambda: f64,
        truncation: u32,
    ) -> Result<Self> {
        let report = source.validate();
        if !report.is_admissible() {
            return Err(Error::Inadmissible(report.to_string()));
        }
        let m = source.len();
        if profile.len() != m {
            return Err(Error::Structural(format!(
                "significance profile is {}x{} but the source has {m} states",
                profile.len(),
                profile.len()
            )));
        }
        if !(0.0..=1.0).contains(&p_success) {
            return Err(Error::Parameter(format!(
                "success probability {p_success} not in [0,1]"
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Parameter(format!("transmission cost {lambda} must be >= 0")));
        }
        if truncation == 0 {
            return Err(Error::Parameter("truncation size must be at least 1".into()));
        }

        let mut states: Vec<SystemState> = (0..m).map(SystemState::synced).collect();
        let mut blocks = Vec::with_capacity(m * (m - 1));
        let mut block_of = vec![vec![None; m]; m];
        for (i, row) in block_of.iter_mut().enumerate() {
            for j in (0..m).filter(|&j| j != i) {
                let len = if source.has_self_transition(i) {
                    truncation as usize
                } else {
                    1
                };
                row[j] = Some(blocks.len());
                blocks.push(ErrorBlock {
                    source: i,
                    estimate: j,
                    start: states.len(),
                    len,
                });
                states.extend((1..=len as u32).map(|age| SystemState::new(i, j, age)));
            }
        }

        let mut mdp = Self {
            source,
            profile,
            p_success,
            lambda,
            truncation,
            states,
            blocks,
            block_of,
            kernel: FiniteMdp {
                rows: [Vec::new(), Vec::new()],
                costs: [Vec::new(), Vec::new()],
            },
        };
        let n = mdp.states.len();
        let mut rows = [Vec::with_capacity(n), Vec::with_capacity(n)];
        let mut costs = [Vec::with_capacity(n), Vec::with_capacity(n)];
        for s in 0..n {
            let state = mdp.states[s];
            for a in Action::BOTH {
                let row = mdp
                    .successors(state, a)
                    .into_iter()
                    .map(|(t, p)| (mdp.index_of(t).expect("successor outside state space"), p))
                    .collect::<Vec<_>>();
                rows[a.index()].push(row);
                costs[a.index()].push(mdp.profile.per_stage_cost(state, a, lambda));
            }
        }
        mdp.kernel = FiniteMdp { rows, costs };
        Ok(mdp)
    }

    /// Idle, transmit and synced successor laws with merged duplicate successors, sorted by
    /// state index.
    fn successors(&self, s: SystemState, a: Action) -> Vec<(SystemState, f64)> {
        let m = self.source.len();
        let prev = (s.source, s.estimate, s.age);
        let mut out: Vec<(SystemState, f64)> = Vec::with_capacity(2 * m);
        let mut push = |next_source: usize, next_estimate: usize, p: f64| {
            if p <= 0.0 {
                return;
            }
            let age = aoce_update(prev, (next_source, next_estimate), self.truncation);
            let t = SystemState::new(next_source, next_estimate, age);
            match out.iter_mut().find(|(u, _)| *u == t) {
                Some((_, q)) => *q += p,
                None => out.push((t, p)),
            }
        };
        let transmits = a.is_transmit() && !s.is_synced();
        for k in 0..m {
            let q = self.source.prob(s.source, k);
            if transmits {
                push(k, s.source, q * self.p_success);
                push(k, s.estimate, q * (1.0 - self.p_success));
            } else {
                push(k, s.estimate, q);
            }
        }
        out.sort_by_key(|(t, _)| self.index_of(*t));
        out
    }

    /// Controlled transition distribution from `s` under `a`.
    pub fn transitions(&self, s: SystemState, a: Action) -> Result<Vec<(SystemState, f64)>> {
        let idx = self.index_of(s).ok_or_else(|| Error::StateOutOfRange(s.to_string()))?;
        Ok(self
            .kernel
            .row(idx, a)
            .iter()
            .map(|&(t, p)| (self.states[t], p))
            .collect())
    }

    pub fn index_of(&self, s: SystemState) -> Option<usize> {
        let m = self.source.len();
        if s.source >= m || s.estimate >= m {
            return None;
        }
        if s.is_synced() {
            return (s.age == 0).then_some(s.source);
        }
        let block = &self.blocks[self.block_of[s.source][s.estimate]?];
        (s.age >= 1 && s.age as usize <= block.len).then(|| block.state_index(s.age))
    }

    pub fn state(&self, idx: usize) -> SystemState {
        self.states[idx]
    }

    pub fn states(&self) -> &[SystemState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn blocks(&self) -> &[ErrorBlock] {
        &self.blocks
    }

    pub fn block(&self, i: usize, j: usize) -> Option<&ErrorBlock> {
        self.block_of[i][j].map(|b| &self.blocks[b])
    }

    pub fn kernel(&self) -> &FiniteMdp {
        &self.kernel
    }

    pub fn source(&self) -> &SourceModel {
        &self.source
    }

    pub fn profile(&self) -> &SignificanceProfile {
        &self.profile
    }

    pub fn p_success(&self) -> f64 {
        self.p_success
    }

    pub fn p_fail(&self) -> f64 {
        1.0 - self.p_success
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn num_sources(&self) -> usize {
        self.source.len()
    }

    /// Index of the default reference state `(1,1,0)`.
    pub fn default_reference(&self) -> usize {
        0
    }

    /// Same source, channel and truncation with a different profile (costs
    /// are rebuilt).
    pub fn with_profile(&self, profile: SignificanceProfile) -> Result<Self> {
        Self::build(
            self.source.clone(),
            profile,
            self.p_success,
            self.lambda,
            self.truncation,
        )
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::build(
            self.source.clone(),
            self.profile.clone(),
            self.p_success,
            lambda,
            self.truncation,
        )
    }

    /// Whether the always-transmit chain on the truncated space is a single
    /// strongly connected component.
    pub fn check_recurrence_always_transmit(&self) -> bool {
        let actions = vec![Action::Transmit; self.len()];
        graph::is_strongly_connected(&self.kernel.induced_adjacency(&actions))
    }
}

/// Transition law of the age alone for a symmetric source (stay probability
/// `p_stay`, change probability `p` to each other state), with ages capped
/// at `truncation`. Zero-probability entries are omitted.
pub fn reduced_age_kernel(
    p: f64,
    p_stay: f64,
    p_success: f64,
    age: u32,
    action: Action,
    truncation: u32,
) -> Vec<(u32, f64)> {
    let p_fail = 1.0 - p_success;
    let grown = (age + 1).min(truncation);
    let raw: Vec<(u32, f64)> = if age == 0 {
        vec![(0, p_stay), (1, 1.0 - p_stay)]
    } else if action.is_transmit() {
        vec![
            (0, p_stay * p_success + p * p_fail),
            (grown, p_stay * p_fail),
            (1, 1.0 - p_stay - p * p_fail),
        ]
    } else {
        vec![(0, p), (grown, p_stay), (1, 1.0 - p - p_stay)]
    };
    let mut merged: Vec<(u32, f64)> = Vec::new();
    for (d, q) in raw {
        if q <= 0.0 {
            continue;
        }
        match merged.iter_mut().find(|(e, _)| *e == d) {
            Some((_, acc)) => *acc += q,
            None => merged.push((d, q)),
        }
    }
    merged.sort_by_key(|(d, _)| *d);
    merged
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::significance::AgeFunction;

    fn example(p_success: f64, truncation: u32) -> TruncatedMdp {
        let source = SourceModel::symmetric(4, 0.1).unwrap();
        let profile = SignificanceProfile::by_class(
            4,
            &[0],
            1.0,
            AgeFunction::exp_rate(0.3, 0.0),
            AgeFunction::logarithmic(1.0, 1.0),
            AgeFunction::constant(1.0),
        )
        .unwrap();
        TruncatedMdp::build(source, profile, p_success, 3.0, truncation).unwrap()
    }

    fn approx_rows(got: Vec<(SystemState, f64)>, want: &[((usize, usize, u32), f64)]) {
        assert_eq!(got.len(), want.len(), "{got:?}");
        for ((i, j, d), p) in want {
            let s = SystemState::new(i - 1, j - 1, *d);
            let (_, q) = got
                .iter()
                .find(|(t, _)| *t == s)
                .unwrap_or_else(|| panic!("{s} missing"));
            assert!((q - p).abs() < 1e-12, "{s}: {q} vs {p}");
        }
    }

    #[test]
    fn aoce_update_branches() {
        assert_eq!(aoce_update((0, 1, 3), (0, 1), 20), 4);
        assert_eq!(aoce_update((0, 1, 3), (2, 1), 20), 1);
        assert_eq!(aoce_update((0, 1, 20), (0, 1), 20), 20);
        assert_eq!(aoce_update((0, 1, 5), (1, 1), 20), 0);
    }

    #[test]
    fn idle_row_from_an_error() {
        let mdp = example(0.9, 20);
        let row = mdp.transitions(SystemState::new(0, 1, 5), Action::Idle).unwrap();
        approx_rows(
            row,
            &[((1, 2, 6), 0.7), ((2, 2, 0), 0.1), ((3, 2, 1), 0.1), ((4, 2, 1), 0.1)],
        );
    }

    #[test]
    fn transmit_row_from_an_error() {
        let mdp = example(0.9, 20);
        let row = mdp.transitions(SystemState::new(0, 1, 5), Action::Transmit).unwrap();
        approx_rows(
            row,
            &[
                ((1, 1, 0), 0.63),
                ((2, 1, 1), 0.09),
                ((3, 1, 1), 0.09),
                ((4, 1, 1), 0.09),
                ((1, 2, 6), 0.07),
                ((2, 2, 0), 0.01),
                ((3, 2, 1), 0.01),
                ((4, 2, 1), 0.01),
            ],
        );
    }

    #[test]
    fn synced_rows_ignore_the_action() {
        let mdp = example(0.9, 20);
        for i in 0..4 {
            let s = SystemState::synced(i);
            let idle = mdp.transitions(s, Action::Idle).unwrap();
            assert_eq!(idle, mdp.transitions(s, Action::Transmit).unwrap());
            assert_eq!(idle.len(), 4);
        }
    }

    #[test]
    fn state_counts() {
        assert_eq!(example(0.9, 20).len(), 244);
        let binary = TruncatedMdp::build(
            SourceModel::symmetric(2, 0.3).unwrap(),
            SignificanceProfile::uniform(2, 1.0, AgeFunction::linear(1.0, 0.0)).unwrap(),
            0.9,
            1.0,
            1,
        )
        .unwrap();
        assert_eq!(binary.states().len(), 4);
    }

    #[test]
    fn periodic_source_state_gets_single_age() {
        let source = SourceModel::new(vec![vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        let profile = SignificanceProfile::uniform(2, 1.0, AgeFunction::linear(1.0, 0.0)).unwrap();
        let mdp = TruncatedMdp::build(source, profile, 0.6, 1.0, 7).unwrap();
        assert_eq!(mdp.block(0, 1).unwrap().len, 1);
        assert_eq!(mdp.block(1, 0).unwrap().len, 7);
        assert_eq!(mdp.len(), 2 + 1 + 7);
        for s in mdp.states() {
            for a in Action::BOTH {
                let row = mdp.transitions(*s, a).unwrap();
                assert!(row.iter().all(|(t, _)| mdp.index_of(*t).is_some()));
            }
        }
    }

    #[test]
    fn out_of_range_states_are_rejected() {
        let mdp = example(0.9, 5);
        assert!(mdp.transitions(SystemState::new(0, 1, 6), Action::Idle).is_err());
        assert!(mdp.transitions(SystemState::new(0, 0, 1), Action::Idle).is_err());
        assert!(mdp.transitions(SystemState::new(0, 1, 0), Action::Idle).is_err());
    }

    #[test]
    fn dimension_mismatch_is_a_construction_error() {
        let err = TruncatedMdp::build(
            SourceModel::symmetric(3, 0.2).unwrap(),
            SignificanceProfile::uniform(2, 1.0, AgeFunction::constant(1.0)).unwrap(),
            0.9,
            1.0,
            4,
        );
        assert!(matches!(err, Err(Error::Structural(_))));
    }

    #[test]
    fn always_transmit_is_irreducible() {
        assert!(example(0.9, 20).check_recurrence_always_transmit());
        assert!(example(0.05, 6).check_recurrence_always_transmit());
    }

    #[test]
    fn reduced_kernel_sums_to_one() {
        for age in 0..6 {
            for a in Action::BOTH {
                let row = reduced_age_kernel(0.1, 0.7, 0.9, age, a, 5);
                let total: f64 = row.iter().map(|(_, p)| p).sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }
}
