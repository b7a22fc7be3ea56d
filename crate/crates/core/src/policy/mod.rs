//! Stationary deterministic policies and their compressed switching form.

mod baseline;

pub use baseline::{make_baseline, BaselineKind, BaselineSpec, EvaluablePolicy};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Action, SystemState, TruncatedMdp};

/// Total map from state index to action.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Policy {
    actions: Vec<Action>,
}

impl Policy {
    pub fn new(actions: Vec<Action>) -> Self {
        Self { actions }
    }

    pub fn constant(n: usize, action: Action) -> Self {
        Self::new(vec![action; n])
    }

    /// Transmit in every error state, stay silent when synced.
    pub fn error_triggered(mdp: &TruncatedMdp) -> Self {
        Self::new(
            mdp.states()
                .iter()
                .map(|s| if s.is_synced() { Action::Idle } else { Action::Transmit })
                .collect(),
        )
    }

    pub fn never(mdp: &TruncatedMdp) -> Self {
        Self::constant(mdp.len(), Action::Idle)
    }

    #[inline]
    pub fn action(&self, s: usize) -> Action {
        self.actions[s]
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn set(&mut self, s: usize, a: Action) {
        self.actions[s] = a;
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Action for an untruncated state: ages past the cap use the action of
    /// the saturated state.
    pub fn action_at(&self, mdp: &TruncatedMdp, s: SystemState) -> Action {
        let capped = if s.is_synced() {
            SystemState::synced(s.source)
        } else {
            let len = mdp.block(s.source, s.estimate).map_or(1, |b| b.len) as u32;
            SystemState::new(s.source, s.estimate, s.age.clamp(1, len))
        };
        self.actions[mdp.index_of(capped).expect("state outside the model")]
    }
}

/// Per-error transmission threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Threshold {
    At(u32),
    Never,
}

impl Threshold {
    pub fn triggers(self, age: u32) -> bool {
        match self {
            Threshold::At(t) => age >= t,
            Threshold::Never => false,
        }
    }

    pub fn value(self) -> Option<u32> {
        match self {
            Threshold::At(t) => Some(t),
            Threshold::Never => None,
        }
    }

    /// Thresholds beyond the reachable ages are the same as never.
    pub fn canonical(self, max_age: u32) -> Self {
        match self {
            Threshold::At(t) if t > max_age => Threshold::Never,
            other => other,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::At(t) => write!(f, "{t}"),
            Threshold::Never => f.write_str("inf"),
        }
    }
}

impl FromStr for Threshold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("never") || t == "-" {
            return Ok(Threshold::Never);
        }
        match t.parse::<u32>() {
            Ok(v) if v >= 1 => Ok(Threshold::At(v)),
            _ => Err(Error::Parameter(format!(
                "threshold '{s}' is not a positive integer or inf"
            ))),
        }
    }
}

impl Serialize for Threshold {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Threshold::At(t) => serializer.serialize_u32(*t),
            Threshold::Never => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u32),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Int(0) => Err(serde::de::Error::custom("threshold must be at least 1")),
            Raw::Int(v) => Ok(Threshold::At(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// `M × M` threshold matrix; the diagonal is always [`Threshold::Never`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SwitchingPolicy {
    thresholds: Vec<Vec<Threshold>>,
}

/// Why a policy cannot be written as a threshold matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NotSwitching {
    /// Transmits at `transmit_at` but not at the older state `idle_at`.
    NonMonotone {
        transmit_at: SystemState,
        idle_at: SystemState,
    },
    TransmitsWhenSynced(SystemState),
}

impl fmt::Display for NotSwitching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NotSwitching::NonMonotone { transmit_at, idle_at } => {
                write!(f, "transmits at {transmit_at} but not at {idle_at}")
            }
            NotSwitching::TransmitsWhenSynced(s) => write!(f, "transmits in synced state {s}"),
        }
    }
}

impl SwitchingPolicy {
    pub fn new(mut thresholds: Vec<Vec<Threshold>>) -> Result<Self> {
        let m = thresholds.len();
        if thresholds.iter().any(|r| r.len() != m) {
            return Err(Error::Structural(format!("threshold matrix must be {m}x{m}")));
        }
        for (i, row) in thresholds.iter_mut().enumerate() {
            if let Some(Threshold::At(0)) = row.iter().find(|t| **t == Threshold::At(0)) {
                return Err(Error::Parameter("thresholds start at 1".into()));
            }
            row[i] = Threshold::Never;
        }
        Ok(Self { thresholds })
    }

    /// Same threshold for every error.
    pub fn uniform(m: usize, t: Threshold) -> Self {
        Self::new(vec![vec![t; m]; m]).expect("square by construction")
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Threshold {
        self.thresholds[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, t: Threshold) {
        if i != j {
            self.thresholds[i][j] = t;
        }
    }

    pub fn rows(&self) -> &[Vec<Threshold>] {
        &self.thresholds
    }

    /// Replaces thresholds that no state can reach with `Never`.
    pub fn canonical(&self, mdp: &TruncatedMdp) -> Self {
        let mut out = self.clone();
        for b in mdp.blocks() {
            out.thresholds[b.source][b.estimate] = self.thresholds[b.source][b.estimate].canonical(b.len as u32);
        }
        out
    }

    /// Transmit iff the pair is an error and its age reaches the threshold.
    pub fn expand(&self, mdp: &TruncatedMdp) -> Result<Policy> {
        if self.len() != mdp.num_sources() {
            return Err(Error::Structural(format!(
                "threshold matrix is {}x{} but the source has {} states",
                self.len(),
                self.len(),
                mdp.num_sources()
            )));
        }
        Ok(Policy::new(
            mdp.states()
                .iter()
                .map(|s| {
                    if !s.is_synced() && self.thresholds[s.source][s.estimate].triggers(s.age) {
                        Action::Transmit
                    } else {
                        Action::Idle
                    }
                })
                .collect(),
        ))
    }

    /// Recovers the threshold matrix of a policy that is silent when synced
    /// and non-decreasing in age for every error.
    pub fn extract(policy: &Policy, mdp: &TruncatedMdp) -> std::result::Result<Self, NotSwitching> {
        let m = mdp.num_sources();
        for i in 0..m {
            if policy.action(i).is_transmit() {
                return Err(NotSwitching::TransmitsWhenSynced(mdp.state(i)));
            }
        }
        let mut thresholds = vec![vec![Threshold::Never; m]; m];
        for b in mdp.blocks() {
            let mut first = None;
            for k in 0..b.len {
                let idx = b.start + k;
                match (policy.action(idx), first) {
                    (Action::Transmit, None) => first = Some(idx),
                    (Action::Idle, Some(t)) => {
                        return Err(NotSwitching::NonMonotone {
                            transmit_at: mdp.state(t),
                            idle_at: mdp.state(idx),
                        })
                    }
                    _ => {}
                }
            }
            thresholds[b.source][b.estimate] = first.map_or(Threshold::Never, |idx| Threshold::At(mdp.state(idx).age));
        }
        Ok(Self { thresholds })
    }

    /// Whether all off-diagonal thresholds coincide.
    pub fn is_uniform(&self) -> bool {
        let mut off = self
            .thresholds
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().filter(move |(j, _)| *j != i).map(|(_, t)| *t));
        match off.next() {
            Some(first) => off.all(|t| t == first),
            None => true,
        }
    }
}

impl fmt::Display for SwitchingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.thresholds.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(j, t)| if i == j { "-".to_string() } else { t.to_string() })
                .collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}
