//! Remote estimation of a Markov source over an unreliable channel, with
//! the significance-aware age of consecutive error (AoCE) as the cost.
//!
//! The crate builds the truncated system-state MDP, solves it with
//! relative value iteration, classical and structured policy iteration,
//! and evaluates policies exactly or by simulation.
//!
//! ```
//! use aoce_core::{AgeFunction, SignificanceProfile, SourceModel, TruncatedMdp};
//! use aoce_core::solvers::{structured_policy_iteration, SpiOptions};
//!
//! let source = SourceModel::symmetric(2, 0.2).unwrap();
//! let profile = SignificanceProfile::uniform(2, 1.0, AgeFunction::linear(1.0, 0.0)).unwrap();
//! let mdp = TruncatedMdp::build(source, profile, 0.8, 2.0, 10).unwrap();
//! let solved = structured_policy_iteration(&mdp, 0, SpiOptions::default()).unwrap();
//! assert!(solved.gain > 0.0);
//! ```

pub mod error;
pub mod evaluation;
pub mod graph;
pub mod mdp;
pub mod policy;
pub mod significance;
pub mod solvers;
pub mod source;

pub use error::{Error, Result};
pub use mdp::{aoce_update, reduced_age_kernel, Action, ErrorBlock, FiniteMdp, SystemState, TruncatedMdp};
pub use policy::{
    make_baseline, BaselineKind, BaselineSpec, EvaluablePolicy, NotSwitching, Policy, SwitchingPolicy, Threshold,
};
pub use significance::{AgeFunction, ErrorClass, ExistenceEntry, ExistenceReport, SignificanceProfile};
pub use solvers::{Diagnostics, SolveResult};
pub use source::{SourceModel, ValidationReport, Violation};
