//! Finite-state Markov source observed by the sensor.
//!
//! States are indexed from 0 internally. External formats (config files,
//! tables) number them from 1, so the alarm state written as `1` is index 0.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph;

/// Tolerance used for row sums and the symmetric-form check.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    q: Vec<Vec<f64>>,
    alarm_states: BTreeSet<usize>,
}

/// One reason a structurally valid matrix is not an admissible source.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RowSum { row: usize, sum: f64 },
    EntryAboveOne { row: usize, col: usize, value: f64 },
    Reducible { components: usize },
    NoSelfTransitions,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum { row, sum } => {
                write!(f, "row {} sums to {sum:.15} instead of 1", row + 1)
            }
            Violation::EntryAboveOne { row, col, value } => {
                write!(f, "entry ({}, {}) = {value} exceeds 1", row + 1, col + 1)
            }
            Violation::Reducible { components } => write!(
                f,
                "transition graph is not strongly connected ({components} components)"
            ),
            Violation::NoSelfTransitions => {
                write!(f, "no state has a self-transition (the aperiodic set is empty)")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "admissible");
        }
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join("; "))
    }
}

impl SourceModel {
    /// Builds a source from a row-major transition matrix. Only structural
    /// problems are rejected here; use [`SourceModel::validate`] for the
    /// admissibility conditions.
    pub fn new(q: Vec<Vec<f64>>) -> Result<Self> {
        let m = q.len();
        if m < 2 {
            return Err(Error::Structural(format!("source needs at least 2 states, got {m}")));
        }
        for (i, row) in q.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Structural(format!(
                    "row {} has {} entries, expected {m}",
                    i + 1,
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Structural(format!(
                        "entry ({}, {}) = {v} is not a non-negative number",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self {
            q,
            alarm_states: BTreeSet::from([0]),
        })
    }

    /// Like [`SourceModel::new`] but also requires admissibility.
    pub fn admissible(q: Vec<Vec<f64>>) -> Result<Self> {
        let model = Self::new(q)?;
        let report = model.validate();
        if report.is_admissible() {
            Ok(model)
        } else {
            Err(Error::Inadmissible(report.to_string()))
        }
    }

    /// Symmetric source with off-diagonal probability `p` and diagonal
    /// `1 - (m - 1) p`.
    pub fn symmetric(m: usize, p: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::Parameter(format!("need at least 2 states, got {m}")));
        }
        let stay = 1.0 - (m as f64 - 1.0) * p;
        if !(p > 0.0 && p < 1.0) || !(stay > 0.0 && stay < 1.0) {
            return Err(Error::Parameter(format!(
                "p = {p} gives self-transition probability {stay} for {m} states; both must lie in (0, 1)"
            )));
        }
        let q = (0..m)
            .map(|i| (0..m).map(|j| if i == j { stay } else { p }).collect())
            .collect();
        Self::new(q)
    }

    /// Replaces the alarm-state labels (0-based). Purely descriptive.
    pub fn with_alarm_states(mut self, alarms: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = alarms.into_iter().collect();
        if let Some(&bad) = set.iter().find(|&&a| a >= self.len()) {
            return Err(Error::Parameter(format!(
                "alarm state {} outside 1..={}",
                bad + 1,
                self.len()
            )));
        }
        self.alarm_states = set;
        Ok(self)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.q.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    #[inline]
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.q[i][j]
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.q
    }

    pub fn alarm_states(&self) -> &BTreeSet<usize> {
        &self.alarm_states
    }

    pub fn is_alarm(&self, i: usize) -> bool {
        self.alarm_states.contains(&i)
    }

    pub fn has_self_transition(&self, i: usize) -> bool {
        self.q[i][i] > 0.0
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for (i, row) in self.q.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                violations.push(Violation::RowSum { row: i, sum });
            }
            for (j, &v) in row.iter().enumerate() {
                if v > 1.0 {
                    violations.push(Violation::EntryAboveOne {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        let adjacency: Vec<Vec<usize>> = self
            .q
            .iter()
            .map(|row| (0..row.len()).filter(|&j| row[j] > 0.0).collect())
            .collect();
        let components = graph::strongly_connected_components(&adjacency).len();
        if components != 1 {
            violations.push(Violation::Reducible { components });
        }
        if (0..self.len()).all(|i| !self.has_self_transition(i)) {
            violations.push(Violation::NoSelfTransitions);
        }
        ValidationReport { violations }
    }

    /// Splits the states into those with a self-transition and those without.
    pub fn classify_states(&self) -> (BTreeSet<usize>, BTreeSet<usize>) {
        (0..self.len()).partition(|&i| self.has_self_transition(i))
    }

    /// True when all off-diagonal entries share one value and all diagonal
    /// entries share another, within [`STOCHASTIC_TOL`].
    pub fn is_symmetric(&self) -> bool {
        let p = self.q[0][1];
        let stay = self.q[0][0];
        self.q.iter().enumerate().all(|(i, row)| {
            row.iter().enumerate().all(|(j, &v)| {
                let target = if i == j { stay } else { p };
                (v - target).abs() <= STOCHASTIC_TOL
            })
        })
    }
}
