//! Experiment configuration read from TOML.
//!
//! Probabilities may be written as numbers or as strings holding a decimal
//! or a fraction (`"1/3"`), so rows of `Q` can sum to one exactly.

use std::fmt;
use std::path::Path;

use aoce_core::{
    AgeFunction, BaselineKind, BaselineSpec, ErrorClass, SignificanceProfile, SourceModel, Threshold, TruncatedMdp,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// A number written either as a TOML number or as a decimal or fraction
/// string. The written form is kept so configs round-trip unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Num {
    pub fn value(&self) -> Result<f64, String> {
        match self {
            Num::Int(v) => Ok(*v as f64),
            Num::Float(v) => Ok(*v),
            Num::Text(s) => parse_number(s),
        }
    }
}

impl From<f64> for Num {
    fn from(v: f64) -> Self {
        Num::Float(v)
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num::Int(v) => write!(f, "{v}"),
            Num::Float(v) => write!(f, "{v}"),
            Num::Text(s) => f.write_str(s),
        }
    }
}

fn parse_number(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let value = match t.split_once('/') {
        Some((a, b)) => {
            let num: f64 = a.trim().parse().map_err(|_| format!("bad numerator in `{s}`"))?;
            let den: f64 = b.trim().parse().map_err(|_| format!("bad denominator in `{s}`"))?;
            if den == 0.0 {
                return Err(format!("zero denominator in `{s}`"));
            }
            num / den
        }
        None => t.parse().map_err(|_| format!("`{s}` is not a number"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

/// One value or a list of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: SourceSpec,
    pub significance: SignificanceSpec,
    pub channel: ChannelSpec,
    pub cost: CostSpec,
    pub truncation: TruncationSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSpec>,
    #[serde(default)]
    pub simulation: SimulationSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetric: Option<SymmetricSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<Num>>>,
    /// 1-based alarm states.
    #[serde(default = "default_alarms")]
    pub alarm_states: Vec<usize>,
}

fn default_alarms() -> Vec<usize> {
    vec![1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetricSpec {
    pub states: usize,
    pub p: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignificanceSpec {
    /// Scalar weight for every error, or a full matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Vec<Num>>>,
    pub missed_alarm: AgeFunction,
    pub false_alarm: AgeFunction,
    pub other: AgeFunction,
    #[serde(default, rename = "override", skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<ErrorOverride>,
}

/// Replaces the weight or age function of one error `(source, estimate)`,
/// both 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorOverride {
    pub error: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<AgeFunction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub p_success: OneOrMany<Num>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    pub lambda: OneOrMany<Num>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSpec {
    pub n: u32,
    /// Truncations for the `truncation` subcommand.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    #[default]
    Spi,
    Pi,
    Rvi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default)]
    pub method: SolverMethod,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// 1-based reference state index into the truncated state space.
    #[serde(default = "default_reference")]
    pub reference: usize,
}

fn default_tolerance() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    100_000
}

fn default_reference() -> usize {
    1
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            method: SolverMethod::default(),
            tolerance: default_tolerance(),
            max_iter: default_max_iter(),
            reference: default_reference(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    pub baselines: Vec<BaselineKind>,
    /// Randomized policies try probabilities `k / randomized_steps`.
    #[serde(default = "default_steps")]
    pub randomized_steps: u32,
    /// Periodic policies try periods `1..=periodic_max` and never.
    #[serde(default = "default_steps")]
    pub periodic_max: u32,
    /// Threshold policies try `1..=threshold_max` and never.
    #[serde(default = "default_steps")]
    pub threshold_max: u32,
}

fn default_steps() -> u32 {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Fixed baselines simulated next to the optimal policy.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub baselines: Vec<BaselineSpec>,
}

fn default_horizon() -> u64 {
    1_000_000
}

fn default_seed() -> u64 {
    2024
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            horizon: default_horizon(),
            seed: default_seed(),
            baselines: Vec::new(),
        }
    }
}

/// Values that are valid TOML but not a valid experiment.
fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn num(field: &str, n: &Num) -> Result<f64, CliError> {
    n.value().map_err(|e| invalid(format!("{field}: {e}")))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.check_shape()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_toml().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn num_states(&self) -> usize {
        match (&self.source.symmetric, &self.source.matrix) {
            (Some(s), _) => s.states,
            (None, Some(m)) => m.len(),
            (None, None) => 0,
        }
    }

    /// Checks everything that does not need the numeric model.
    fn check_shape(&self) -> Result<(), CliError> {
        let m = match (&self.source.symmetric, &self.source.matrix) {
            (Some(_), Some(_)) => return Err(invalid("source: give either `symmetric` or `matrix`, not both")),
            (None, None) => return Err(invalid("source: one of `symmetric` or `matrix` is required")),
            _ => self.num_states(),
        };
        if m < 2 {
            return Err(invalid(format!("source: needs at least 2 states, got {m}")));
        }
        for &a in &self.source.alarm_states {
            if !(1..=m).contains(&a) {
                return Err(invalid(format!("source.alarm_states: state {a} outside 1..{m}")));
            }
        }
        match (&self.significance.weight, &self.significance.weights) {
            (Some(_), Some(_)) => return Err(invalid("significance: give either `weight` or `weights`, not both")),
            (None, Some(w)) if w.len() != m || w.iter().any(|r| r.len() != m) => {
                return Err(invalid(format!("significance.weights: expected a {m}x{m} matrix")))
            }
            _ => {}
        }
        for o in &self.significance.overrides {
            let [i, j] = o.error;
            if !(1..=m).contains(&i) || !(1..=m).contains(&j) || i == j {
                return Err(invalid(format!(
                    "significance.override: ({i},{j}) is not an error of 1..{m}"
                )));
            }
        }
        if self.channel.p_success.to_vec().is_empty() {
            return Err(invalid("channel.p_success: empty list"));
        }
        if self.cost.lambda.to_vec().is_empty() {
            return Err(invalid("cost.lambda: empty list"));
        }
        if self.truncation.n == 0 || self.truncation.sweep.contains(&0) {
            return Err(invalid("truncation: N must be at least 1"));
        }
        if self.simulation.horizon < aoce_core::evaluation::BATCHES {
            return Err(invalid(format!(
                "simulation.horizon: at least {} slots",
                aoce_core::evaluation::BATCHES
            )));
        }
        for spec in &self.simulation.baselines {
            spec.validate()
                .map_err(|e| invalid(format!("simulation.baselines: {e}")))?;
        }
        Ok(())
    }

    pub fn p_success(&self) -> Result<Vec<f64>, CliError> {
        self.channel
            .p_success
            .to_vec()
            .iter()
            .map(|p| {
                let v = num("channel.p_success", p)?;
                if (0.0..=1.0).contains(&v) {
                    Ok(v)
                } else {
                    Err(invalid(format!("channel.p_success: {v} not in [0,1]")))
                }
            })
            .collect()
    }

    pub fn lambdas(&self) -> Result<Vec<f64>, CliError> {
        self.cost
            .lambda
            .to_vec()
            .iter()
            .map(|l| {
                let v = num("cost.lambda", l)?;
                if v >= 0.0 {
                    Ok(v)
                } else {
                    Err(invalid(format!("cost.lambda: {v} is negative")))
                }
            })
            .collect()
    }

    /// Builds the source; admissibility failures keep their own error kind.
    pub fn source_model(&self) -> Result<SourceModel, CliError> {
        let alarms = self.source.alarm_states.iter().map(|a| a - 1);
        let model = match (&self.source.symmetric, &self.source.matrix) {
            (Some(s), _) => SourceModel::symmetric(s.states, num("source.symmetric.p", &s.p)?),
            (None, Some(rows)) => {
                let q = rows
                    .iter()
                    .map(|r| r.iter().map(|v| num("source.matrix", v)).collect::<Result<Vec<_>, _>>())
                    .collect::<Result<Vec<_>, _>>()?;
                SourceModel::admissible(q)
            }
            (None, None) => unreachable!("checked on load"),
        };
        model
            .and_then(|m| m.with_alarm_states(alarms))
            .map_err(CliError::from_model)
    }

    pub fn profile(&self) -> Result<SignificanceProfile, CliError> {
        let m = self.num_states();
        let sig = &self.significance;
        let alarms: Vec<usize> = self.source.alarm_states.iter().map(|a| a - 1).collect();
        let mut weights: Vec<Vec<f64>> = match (&sig.weight, &sig.weights) {
            (_, Some(w)) => w
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|v| num("significance.weights", v))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<_, _>>()?,
            (Some(w), None) => {
                let w = num("significance.weight", w)?;
                (0..m)
                    .map(|i| (0..m).map(|j| if i == j { 0.0 } else { w }).collect())
                    .collect()
            }
            (None, None) => (0..m)
                .map(|i| (0..m).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
                .collect(),
        };
        let mut ages: Vec<Vec<AgeFunction>> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| match ErrorClass::of(i, j, |s| alarms.contains(&s)) {
                        ErrorClass::Synced => AgeFunction::constant(0.0),
                        ErrorClass::MissedAlarm => sig.missed_alarm.clone(),
                        ErrorClass::FalseAlarm => sig.false_alarm.clone(),
                        ErrorClass::Normal => sig.other.clone(),
                    })
                    .collect()
            })
            .collect();
        for o in &sig.overrides {
            let (i, j) = (o.error[0] - 1, o.error[1] - 1);
            if let Some(w) = &o.weight {
                weights[i][j] = num("significance.override.weight", w)?;
            }
            if let Some(g) = &o.age {
                ages[i][j] = g.clone();
            }
        }
        SignificanceProfile::new(weights, ages).map_err(|e| invalid(format!("significance: {e}")))
    }

    /// Every `(p_s, λ)` pair of the experiment, in configuration order.
    pub fn grid(&self) -> Result<Vec<(f64, f64)>, CliError> {
        let ps = self.p_success()?;
        let lambdas = self.lambdas()?;
        Ok(ps.iter().flat_map(|&p| lambdas.iter().map(move |&l| (p, l))).collect())
    }

    pub fn build(&self, p_success: f64, lambda: f64, truncation: u32) -> Result<TruncatedMdp, CliError> {
        TruncatedMdp::build(self.source_model()?, self.profile()?, p_success, lambda, truncation)
            .map_err(CliError::from_model)
    }

    /// Parameter grids of the listed baselines.
    pub fn baseline_grids(&self) -> Vec<(BaselineKind, Vec<BaselineSpec>)> {
        let Some(c) = &self.compare else {
            return Vec::new();
        };
        c.baselines
            .iter()
            .map(|&kind| {
                let grid = match kind {
                    BaselineKind::Randomized => (0..=c.randomized_steps)
                        .map(|k| BaselineSpec::Randomized {
                            probability: f64::from(k) / f64::from(c.randomized_steps.max(1)),
                        })
                        .collect(),
                    BaselineKind::Periodic => (1..=c.periodic_max)
                        .map(|d| BaselineSpec::Periodic { period: Some(d) })
                        .chain([BaselineSpec::Periodic { period: None }])
                        .collect(),
                    BaselineKind::Threshold => (1..=c.threshold_max)
                        .map(|d| BaselineSpec::Threshold {
                            delta: Threshold::At(d),
                        })
                        .chain([BaselineSpec::Threshold {
                            delta: Threshold::Never,
                        }])
                        .collect(),
                    BaselineKind::Reactive => vec![BaselineSpec::Reactive],
                    BaselineKind::ErrorTriggered => vec![BaselineSpec::ErrorTriggered],
                    BaselineKind::DistortionProxy => vec![BaselineSpec::DistortionProxy],
                    BaselineKind::AoiReference => vec![BaselineSpec::AoiReference],
                    BaselineKind::AoiiReference => vec![BaselineSpec::AoiiReference],
                };
                (kind, grid)
            })
            .collect()
    }
}
