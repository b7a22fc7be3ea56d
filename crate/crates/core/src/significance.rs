//! Error significance weights, non-linear age functions, and the per-stage
//! cost they induce.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Action, SystemState};
use crate::source::SourceModel;

/// Ages up to which monotonicity and non-negativity are checked when an
/// age function is accepted.
pub const CHECK_HORIZON: u32 = 128;

fn default_base() -> f64 {
    std::f64::consts::E
}

/// Penalty for having been in the same estimation error for `δ` slots.
///
/// Evaluated only for `δ ≥ 1`; synced pairs never reach an age function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgeFunction {
    Constant {
        value: f64,
    },
    /// `inner(min(δ, max_age))`
    Clipped {
        inner: Box<AgeFunction>,
        max_age: u32,
    },
    /// `slope·δ + intercept`
    Linear {
        slope: f64,
        intercept: f64,
    },
    /// `log_base(scale·δ) + offset`, natural logarithm unless `base` is
    /// given.
    Logarithmic {
        #[serde(default = "default_base")]
        base: f64,
        #[serde(default = "one")]
        scale: f64,
        offset: f64,
    },
    /// `base^(rate·δ) + offset`
    Exponential {
        #[serde(default = "default_base")]
        base: f64,
        rate: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Explicit values for `δ = 1, 2, …`; beyond the last entry the final
    /// ratio is repeated.
    Table {
        values: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl AgeFunction {
    pub fn constant(value: f64) -> Self {
        AgeFunction::Constant { value }
    }

    pub fn linear(slope: f64, intercept: f64) -> Self {
        AgeFunction::Linear { slope, intercept }
    }

    /// `ln(scale·δ) + offset`
    pub fn logarithmic(scale: f64, offset: f64) -> Self {
        Self::log_base(std::f64::consts::E, scale, offset)
    }

    pub fn log_base(base: f64, scale: f64, offset: f64) -> Self {
        AgeFunction::Logarithmic { base, scale, offset }
    }

    /// `e^(rate·δ) + offset`
    pub fn exp_rate(rate: f64, offset: f64) -> Self {
        AgeFunction::Exponential {
            base: std::f64::consts::E,
            rate,
            offset,
        }
    }

    pub fn exponential(base: f64, rate: f64, offset: f64) -> Self {
        AgeFunction::Exponential { base, rate, offset }
    }

    pub fn clipped(inner: AgeFunction, max_age: u32) -> Self {
        AgeFunction::Clipped {
            inner: Box::new(inner),
            max_age,
        }
    }

    pub fn table(values: Vec<f64>) -> Self {
        AgeFunction::Table { values }
    }

    /// Evaluates the function at age `delta ≥ 1`.
    pub fn value(&self, delta: u32) -> f64 {
        debug_assert!(delta >= 1);
        let d = f64::from(delta);
        match self {
            AgeFunction::Constant { value } => *value,
            AgeFunction::Clipped { inner, max_age } => inner.value(delta.min(*max_age)),
            AgeFunction::Linear { slope, intercept } => slope * d + intercept,
            AgeFunction::Logarithmic { base, scale, offset } => (scale * d).log(*base) + offset,
            AgeFunction::Exponential { base, rate, offset } => base.powf(rate * d) + offset,
            AgeFunction::Table { values } => {
                let n = values.len();
                let idx = delta as usize;
                if idx <= n {
                    values[idx - 1]
                } else {
                    values[n - 1] * table_ratio(values).powi((idx - n) as i32)
                }
            }
        }
    }

    /// `lim g(δ+1)/g(δ)` as `δ → ∞`, evaluated in closed form per kind.
    pub fn growth_ratio_limit(&self) -> f64 {
        match self {
            AgeFunction::Constant { .. }
            | AgeFunction::Clipped { .. }
            | AgeFunction::Linear { .. }
            | AgeFunction::Logarithmic { .. } => 1.0,
            AgeFunction::Exponential { base, rate, .. } => base.powf(*rate),
            AgeFunction::Table { values } => table_ratio(values),
        }
    }

    /// Parameter checks plus non-negativity and monotonicity on
    /// `1..=CHECK_HORIZON`.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        match self {
            AgeFunction::Constant { value } if !(*value >= 0.0 && value.is_finite()) => {
                return bad(format!("constant age function must be finite and >= 0, got {value}"));
            }
            AgeFunction::Clipped { inner, max_age } => {
                if *max_age == 0 {
                    return bad("clipping age must be at least 1".into());
                }
                inner.validate()?;
            }
            AgeFunction::Linear { slope, .. } if *slope < 0.0 => {
                return bad(format!("linear slope must be >= 0, got {slope}"));
            }
            AgeFunction::Logarithmic { base, scale, .. } => {
                if !(*base > 1.0 && base.is_finite()) {
                    return bad(format!("logarithm base must be > 1, got {base}"));
                }
                if *scale <= 0.0 {
                    return bad(format!("logarithmic scale must be > 0, got {scale}"));
                }
            }
            AgeFunction::Exponential { base, rate, .. } => {
                if *base < 1.0 {
                    return bad(format!("exponential base must be >= 1, got {base}"));
                }
                if *rate < 0.0 {
                    return bad(format!("exponential rate must be >= 0, got {rate}"));
                }
            }
            AgeFunction::Table { values } => {
                if values.is_empty() {
                    return bad("age table is empty".into());
                }
                let n = values.len();
                if n >= 2 && values[n - 2] == 0.0 && values[n - 1] > 0.0 {
                    return bad("age table cannot extrapolate from a zero penultimate entry".into());
                }
            }
            _ => {}
        }
        let mut prev = self.value(1);
        if !(prev.is_finite() && prev >= 0.0) {
            return bad(format!("age function is negative or not finite at age 1 ({prev})"));
        }
        for delta in 2..=CHECK_HORIZON {
            let v = self.value(delta);
            if v.is_nan() || v < 0.0 {
                return bad(format!("age function is negative at age {delta} ({v})"));
            }
            if v < prev {
                return bad(format!("age function decreases between ages {} and {delta}", delta - 1));
            }
            prev = v;
        }
        Ok(())
    }
}

fn table_ratio(values: &[f64]) -> f64 {
    match values {
        [.., prev, last] if *prev > 0.0 => last / prev,
        _ => 1.0,
    }
}

/// Distortion weights `D` and age functions `G`, both `M × M`, with the
/// diagonal fixed to zero cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceProfile {
    weights: Vec<Vec<f64>>,
    ages: Vec<Vec<AgeFunction>>,
}

impl SignificanceProfile {
    pub fn new(weights: Vec<Vec<f64>>, mut ages: Vec<Vec<AgeFunction>>) -> Result<Self> {
        let m = weights.len();
        if ages.len() != m || weights.iter().any(|r| r.len() != m) || ages.iter().any(|r| r.len() != m) {
            return Err(Error::Structural(format!(
                "weight and age-function matrices must both be {m}x{m}"
            )));
        }
        for i in 0..m {
            for j in 0..m {
                let w = weights[i][j];
                if i == j {
                    if w != 0.0 {
                        return Err(Error::Parameter(format!(
                            "diagonal weight D[{0},{0}] must be 0, got {w}",
                            i + 1
                        )));
                    }
                    ages[i][i] = AgeFunction::constant(0.0);
                } else {
                    if !(w > 0.0 && w.is_finite()) {
                        return Err(Error::Parameter(format!(
                            "weight D[{},{}] must be positive, got {w}",
                            i + 1,
                            j + 1
                        )));
                    }
                    ages[i][j]
                        .validate()
                        .map_err(|e| Error::Parameter(format!("age function ({},{}): {e}", i + 1, j + 1)))?;
                }
            }
        }
        Ok(Self { weights, ages })
    }

    /// Same weight and age function for every error.
    pub fn uniform(m: usize, weight: f64, age: AgeFunction) -> Result<Self> {
        Self::by_class(m, &[0], weight, age.clone(), age.clone(), age)
    }

    /// Assigns age functions by error class: missed alarm (source in an
    /// alarm state, estimate not), false alarm (the reverse), and all other
    /// errors. `alarms` holds 0-based state indices.
    pub fn by_class(
        m: usize,
        alarms: &[usize],
        weight: f64,
        missed: AgeFunction,
        false_alarm: AgeFunction,
        other: AgeFunction,
    ) -> Result<Self> {
        let weights = (0..m)
            .map(|i| (0..m).map(|j| if i == j { 0.0 } else { weight }).collect())
            .collect();
        let ages = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| match ErrorClass::of(i, j, |s| alarms.contains(&s)) {
                        ErrorClass::Synced => AgeFunction::constant(0.0),
                        ErrorClass::MissedAlarm => missed.clone(),
                        ErrorClass::FalseAlarm => false_alarm.clone(),
                        ErrorClass::Normal => other.clone(),
                    })
                    .collect()
            })
            .collect();
        Self::new(weights, ages)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i][j]
    }

    pub fn age_function(&self, i: usize, j: usize) -> &AgeFunction {
        &self.ages[i][j]
    }

    /// Copy of this profile with every age function replaced by the constant
    /// one, leaving only the content-aware distortion.
    pub fn distortion_only(&self) -> Self {
        let m = self.len();
        let ages = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| AgeFunction::constant(if i == j { 0.0 } else { 1.0 }))
                    .collect()
            })
            .collect();
        Self {
            weights: self.weights.clone(),
            ages,
        }
    }

    /// Instantaneous cost `D_ij · g_ij(δ)`.
    pub fn age_penalty(&self, i: usize, j: usize, delta: i64) -> Result<f64> {
        if delta < 0 || (delta == 0 && i != j) {
            return Err(Error::AgeDomain(delta));
        }
        if i == j {
            return Ok(0.0);
        }
        let delta = u32::try_from(delta).map_err(|_| Error::AgeDomain(delta))?;
        Ok(self.weights[i][j] * self.ages[i][j].value(delta))
    }

    /// Cost of the system state alone; infallible for well-formed states.
    pub fn state_cost(&self, s: SystemState) -> f64 {
        if s.is_synced() {
            0.0
        } else {
            self.weights[s.source][s.estimate] * self.ages[s.source][s.estimate].value(s.age)
        }
    }

    /// `c(s) + λ·1{a = transmit}`.
    pub fn per_stage_cost(&self, s: SystemState, action: Action, lambda: f64) -> f64 {
        self.state_cost(s) + if action.is_transmit() { lambda } else { 0.0 }
    }

    /// Checks the ratio condition for every error whose source state has a
    /// self-transition.
    pub fn check_existence(&self, source: &SourceModel, p_fail: f64) -> ExistenceReport {
        let m = source.len();
        let mut entries = Vec::new();
        for i in 0..m {
            if !source.has_self_transition(i) {
                continue;
            }
            let stay = source.prob(i, i) * p_fail;
            let bound = if stay == 0.0 { f64::INFINITY } else { 1.0 / stay };
            for j in (0..m).filter(|&j| j != i) {
                let ratio = self.ages[i][j].growth_ratio_limit();
                entries.push(ExistenceEntry {
                    source: i,
                    estimate: j,
                    ratio,
                    bound,
                    passed: ratio < bound,
                });
            }
        }
        ExistenceReport { entries }
    }
}

/// Error type of a (source, estimate) pair relative to the alarm labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorClass {
    Synced,
    MissedAlarm,
    FalseAlarm,
    Normal,
}

impl ErrorClass {
    pub fn of(i: usize, j: usize, is_alarm: impl Fn(usize) -> bool) -> Self {
        if i == j {
            ErrorClass::Synced
        } else if is_alarm(i) && !is_alarm(j) {
            ErrorClass::MissedAlarm
        } else if !is_alarm(i) && is_alarm(j) {
            ErrorClass::FalseAlarm
        } else {
            ErrorClass::Normal
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ErrorClass::Synced => "synced",
            ErrorClass::MissedAlarm => "missed_alarm",
            ErrorClass::FalseAlarm => "false_alarm",
            ErrorClass::Normal => "normal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExistenceEntry {
    pub source: usize,
    pub estimate: usize,
    pub ratio: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExistenceReport {
    pub entries: Vec<ExistenceEntry>,
}

impl ExistenceReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ExistenceEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }
}

impl fmt::Display for ExistenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>7} {:>12} {:>12}  status", "error", "ratio", "bound")?;
        for e in &self.entries {
            let bound = if e.bound.is_infinite() {
                "inf".to_string()
            } else {
                format!("{:.4}", e.bound)
            };
            writeln!(
                f,
                "({:>2},{:>2}) {:>12.4} {:>12}  {}",
                e.source + 1,
                e.estimate + 1,
                e.ratio,
                bound,
                if e.passed { "ok" } else { "FAIL" }
            )?;
        }
        write!(f, "overall: {}", if self.passed() { "pass" } else { "fail" })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_profile() -> SignificanceProfile {
        SignificanceProfile::by_class(
            4,
            &[0],
            1.0,
            AgeFunction::exp_rate(0.3, 0.0),
            AgeFunction::logarithmic(1.0, 1.0),
            AgeFunction::constant(1.0),
        )
        .unwrap()
    }

    #[test]
    fn penalties_on_the_behavioral_example() {
        let p = example_profile();
        // missed alarm (1,2) at age 2: e^0.6
        assert!((p.age_penalty(0, 1, 2).unwrap() - 0.6f64.exp()).abs() < 1e-12);
        assert!((p.age_penalty(0, 1, 2).unwrap() - 1.8221).abs() < 1e-4);
        // false alarm (3,1) at age 10: ln 10 + 1
        assert!((p.age_penalty(2, 0, 10).unwrap() - 3.3026).abs() < 1e-4);
        // normal error (2,3)
        assert_eq!(p.age_penalty(1, 2, 7).unwrap(), 1.0);
        assert_eq!(p.age_penalty(2, 2, 0).unwrap(), 0.0);
    }

    #[test]
    fn age_domain_errors() {
        let p = example_profile();
        assert!(matches!(p.age_penalty(0, 1, -1), Err(Error::AgeDomain(-1))));
        assert!(matches!(p.age_penalty(0, 1, 0), Err(Error::AgeDomain(0))));
    }

    #[test]
    fn per_stage_cost_adds_transmission_price() {
        let p = example_profile();
        let synced = SystemState::synced(0);
        assert_eq!(p.per_stage_cost(synced, Action::Transmit, 3.0), 3.0);
        let err = SystemState::new(0, 1, 1);
        assert!((p.per_stage_cost(err, Action::Idle, 3.0) - 1.3499).abs() < 1e-4);
        assert!((p.per_stage_cost(err, Action::Transmit, 3.0) - 4.3499).abs() < 1e-4);
    }

    #[test]
    fn growth_ratio_limits() {
        assert_eq!(AgeFunction::linear(1.0, 0.0).growth_ratio_limit(), 1.0);
        assert!((AgeFunction::exp_rate(0.3, 0.0).growth_ratio_limit() - 1.3499).abs() < 1e-4);
        let clipped = AgeFunction::clipped(AgeFunction::exp_rate(2.0, 0.0), 5);
        assert_eq!(clipped.growth_ratio_limit(), 1.0);
        assert_eq!(AgeFunction::logarithmic(2.0, 0.0).growth_ratio_limit(), 1.0);
        assert_eq!(AgeFunction::table(vec![1.0, 2.0, 3.0]).growth_ratio_limit(), 1.5);
        assert_eq!(AgeFunction::exponential(2.0, 1.0, 0.0).growth_ratio_limit(), 2.0);
    }

    #[test]
    fn clipped_and_table_values() {
        let clipped = AgeFunction::clipped(AgeFunction::linear(2.0, 0.0), 3);
        assert_eq!(clipped.value(2), 4.0);
        assert_eq!(clipped.value(9), 6.0);
        let table = AgeFunction::table(vec![1.0, 2.0, 4.0]);
        assert_eq!(table.value(3), 4.0);
        assert_eq!(table.value(5), 16.0);
    }

    #[test]
    fn invalid_age_functions_are_rejected() {
        assert!(AgeFunction::linear(-1.0, 5.0).validate().is_err());
        assert!(AgeFunction::logarithmic(1.0, -0.5).validate().is_err());
        assert!(AgeFunction::exp_rate(0.3, -3.0).validate().is_err());
        assert!(AgeFunction::table(vec![3.0, 2.0]).validate().is_err());
        assert!(AgeFunction::table(vec![]).validate().is_err());
        assert!(AgeFunction::exponential(0.5, 1.0, 0.0).validate().is_err());
        assert!(AgeFunction::exp_rate(0.3, -0.5).validate().is_ok());
    }

    #[test]
    fn profile_enforces_zero_diagonal() {
        let p = SignificanceProfile::uniform(3, 2.0, AgeFunction::linear(1.0, 0.0)).unwrap();
        assert_eq!(p.age_function(1, 1), &AgeFunction::constant(0.0));
        assert_eq!(p.weight(1, 1), 0.0);
        let bad = SignificanceProfile::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            vec![vec![AgeFunction::constant(1.0); 2]; 2],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn existence_on_the_behavioral_example() {
        let source = SourceModel::symmetric(4, 0.1).unwrap();
        let report = example_profile().check_existence(&source, 0.1);
        assert!(report.passed());
        let missed = &report.entries[0];
        assert_eq!((missed.source, missed.estimate), (0, 1));
        assert!((missed.ratio - 1.3499).abs() < 1e-4);
        assert!((missed.bound - 14.2857).abs() < 1e-4);
    }

    #[test]
    fn existence_fails_for_fast_exponential() {
        let source = SourceModel::symmetric(4, 0.1).unwrap();
        let fast = SignificanceProfile::uniform(4, 1.0, AgeFunction::exponential(20.0, 1.0, 0.0)).unwrap();
        let report = fast.check_existence(&source, 0.1);
        assert!(!report.passed());
        assert_eq!(report.failures().count(), 12);
        // perfect channel: unbounded tolerance
        assert!(fast.check_existence(&source, 0.0).passed());
    }

    #[test]
    fn existence_skips_states_without_self_transition() {
        let source = SourceModel::new(vec![vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        let fast = SignificanceProfile::uniform(2, 1.0, AgeFunction::exponential(100.0, 1.0, 0.0)).unwrap();
        let report = fast.check_existence(&source, 0.5);
        assert_eq!(report.entries.len(), 1);
        assert_eq!(report.entries[0].source, 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_age_function() -> impl Strategy<Value = AgeFunction> {
            prop_oneof![
                (0.0f64..5.0).prop_map(AgeFunction::constant),
                (0.0f64..3.0, 0.0f64..3.0).prop_map(|(a, b)| AgeFunction::linear(a, b)),
                (1.0f64..4.0, 0.0f64..2.0).prop_map(|(a, b)| AgeFunction::logarithmic(a, b)),
                (0.0f64..0.5, 0.0f64..2.0).prop_map(|(r, z)| AgeFunction::exp_rate(r, z)),
                (0.0f64..1.0, 1u32..20).prop_map(|(r, m)| AgeFunction::clipped(AgeFunction::exp_rate(r, 0.0), m)),
            ]
        }

        proptest! {
            #[test]
            fn age_functions_are_monotone(g in any_age_function(), n in 2u32..200) {
                prop_assert!(g.validate().is_ok());
                for d in 1..n {
                    prop_assert!(g.value(d + 1) >= g.value(d));
                }
            }

            #[test]
            fn bounded_growth_always_passes(
                g in prop_oneof![
                    (0.0f64..3.0, 0.0f64..3.0).prop_map(|(a, b)| AgeFunction::linear(a, b)),
                    (1.0f64..4.0, 0.0f64..2.0).prop_map(|(a, b)| AgeFunction::logarithmic(a, b)),
                    (0.0f64..5.0).prop_map(AgeFunction::constant),
                ],
                p in 0.01f64..0.3,
                p_fail in 0.0f64..=1.0,
            ) {
                let source = SourceModel::symmetric(4, p).unwrap();
                let profile = SignificanceProfile::uniform(4, 1.0, g).unwrap();
                prop_assert!(profile.check_existence(&source, p_fail).passed());
            }

            #[test]
            fn exponential_passes_iff_ratio_below_bound(
                rate in 0.0f64..4.0,
                p in 0.01f64..0.3,
                p_fail in 0.0f64..=1.0,
            ) {
                let source = SourceModel::symmetric(4, p).unwrap();
                let profile =
                    SignificanceProfile::uniform(4, 1.0, AgeFunction::exp_rate(rate, 0.0)).unwrap();
                let stay = source.prob(0, 0) * p_fail;
                let expected = stay == 0.0 || rate.exp() < 1.0 / stay;
                prop_assert_eq!(profile.check_existence(&source, p_fail).passed(), expected);
            }
        }
    }
}
