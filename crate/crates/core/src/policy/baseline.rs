//! Reference transmission policies used for comparison.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::TruncatedMdp;
use crate::solvers::reference::{solve_aoi_reference, solve_aoii_reference};
use crate::solvers::{structured_policy_iteration, SpiOptions};

use super::{Policy, SwitchingPolicy, Threshold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Randomized,
    Periodic,
    Reactive,
    ErrorTriggered,
    Threshold,
    DistortionProxy,
    AoiReference,
    AoiiReference,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 8] = [
        BaselineKind::Randomized,
        BaselineKind::Periodic,
        BaselineKind::Reactive,
        BaselineKind::ErrorTriggered,
        BaselineKind::Threshold,
        BaselineKind::DistortionProxy,
        BaselineKind::AoiReference,
        BaselineKind::AoiiReference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Randomized => "randomized",
            BaselineKind::Periodic => "periodic",
            BaselineKind::Reactive => "reactive",
            BaselineKind::ErrorTriggered => "error_triggered",
            BaselineKind::Threshold => "threshold",
            BaselineKind::DistortionProxy => "distortion_proxy",
            BaselineKind::AoiReference => "aoi_reference",
            BaselineKind::AoiiReference => "aoii_reference",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown baseline kind `{s}`")))
    }
}

/// A baseline together with its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaselineSpec {
    /// Transmit in every slot with probability `probability`.
    Randomized {
        probability: f64,
    },
    /// Transmit every `period` slots; `None` never transmits.
    Periodic {
        period: Option<u32>,
    },
    /// Transmit whenever the source state just changed.
    Reactive,
    /// Transmit whenever the estimate is wrong.
    ErrorTriggered,
    /// Transmit once the AoCE reaches `delta`, whatever the error.
    Threshold {
        delta: Threshold,
    },
    /// Optimal policy for the age-agnostic cost `D_ij`.
    DistortionProxy,
    AoiReference,
    AoiiReference,
}

impl BaselineSpec {
    pub fn kind(&self) -> BaselineKind {
        match self {
            BaselineSpec::Randomized { .. } => BaselineKind::Randomized,
            BaselineSpec::Periodic { .. } => BaselineKind::Periodic,
            BaselineSpec::Reactive => BaselineKind::Reactive,
            BaselineSpec::ErrorTriggered => BaselineKind::ErrorTriggered,
            BaselineSpec::Threshold { .. } => BaselineKind::Threshold,
            BaselineSpec::DistortionProxy => BaselineKind::DistortionProxy,
            BaselineSpec::AoiReference => BaselineKind::AoiReference,
            BaselineSpec::AoiiReference => BaselineKind::AoiiReference,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BaselineSpec::Randomized { probability } if !(0.0..=1.0).contains(&probability) => Err(Error::Parameter(
                format!("transmission probability {probability} not in [0,1]"),
            )),
            BaselineSpec::Periodic { period: Some(0) } => Err(Error::Parameter("period must be at least 1".into())),
            BaselineSpec::Threshold {
                delta: Threshold::At(0),
            } => Err(Error::Parameter("threshold must be at least 1".into())),
            _ => Ok(()),
        }
    }

    /// Short parameter rendering for tables, e.g. `p=0.25` or `d=inf`.
    pub fn parameter(&self) -> Option<String> {
        match self {
            BaselineSpec::Randomized { probability } => Some(format!("p={probability}")),
            BaselineSpec::Periodic { period } => {
                Some(format!("d={}", period.map_or("inf".to_string(), |d| d.to_string())))
            }
            BaselineSpec::Threshold { delta } => Some(format!("delta={delta}")),
            _ => None,
        }
    }
}

/// A policy in the form the evaluators consume.
#[derive(Debug, Clone, PartialEq)]
pub enum EvaluablePolicy {
    /// Map from the truncated state space; evaluable exactly.
    Stationary(Policy),
    /// Needs the previous source state.
    Reactive,
    /// Open loop, simulation only.
    Randomized { probability: f64 },
    /// Open loop, simulation only.
    Periodic { period: Option<u32> },
    /// Transmit when the age of information reaches the threshold.
    Aoi { threshold: Threshold },
    /// Transmit when the age of incorrect information reaches the
    /// threshold of the current error.
    Aoii { thresholds: SwitchingPolicy },
}

impl EvaluablePolicy {
    pub fn as_stationary(&self) -> Option<&Policy> {
        match self {
            EvaluablePolicy::Stationary(p) => Some(p),
            _ => None,
        }
    }
}

pub fn make_baseline(spec: &BaselineSpec, mdp: &TruncatedMdp) -> Result<EvaluablePolicy> {
    spec.validate()?;
    let m = mdp.num_sources();
    Ok(match *spec {
        BaselineSpec::Randomized { probability } => EvaluablePolicy::Randomized { probability },
        BaselineSpec::Periodic { period } => EvaluablePolicy::Periodic { period },
        BaselineSpec::Reactive => EvaluablePolicy::Reactive,
        BaselineSpec::ErrorTriggered => EvaluablePolicy::Stationary(Policy::error_triggered(mdp)),
        BaselineSpec::Threshold { delta } => {
            EvaluablePolicy::Stationary(SwitchingPolicy::uniform(m, delta).expand(mdp)?)
        }
        BaselineSpec::DistortionProxy => {
            let proxy = mdp.with_profile(mdp.profile().distortion_only())?;
            let solved = structured_policy_iteration(&proxy, proxy.default_reference(), SpiOptions::default())?;
            EvaluablePolicy::Stationary(solved.policy)
        }
        BaselineSpec::AoiReference => EvaluablePolicy::Aoi {
            threshold: solve_aoi_reference(mdp)?.threshold,
        },
        BaselineSpec::AoiiReference => EvaluablePolicy::Aoii {
            thresholds: solve_aoii_reference(mdp)?.thresholds,
        },
    })
}
