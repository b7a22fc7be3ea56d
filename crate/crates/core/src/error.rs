use thiserror::Error;

use crate::significance::ExistenceReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The input is not shaped like the thing it claims to be (non-square
    /// matrix, negative probability, wrong dimensions).
    #[error("malformed input: {0}")]
    Structural(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("source model is not admissible: {0}")]
    Inadmissible(String),

    #[error("state {0} is outside the truncated state space")]
    StateOutOfRange(String),

    #[error("age must be non-negative and zero only for synced pairs, got {0}")]
    AgeDomain(i64),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("policy evaluation failed: {0}")]
    Evaluation(String),

    #[error("induced chain has {} recurrent classes reachable from the start state; sizes {:?}",
        .0.len(), .0.iter().map(Vec::len).collect::<Vec<_>>())]
    MultipleRecurrentClasses(Vec<Vec<usize>>),

    #[error("existence condition violated for {} error(s)", .0.failures().count())]
    ExistenceViolated(Box<ExistenceReport>),

    #[error("exhaustive search refused: {count} candidates exceeds the limit of {limit}")]
    SearchTooLarge { count: u128, limit: u128 },

    #[error("empty parameter grid")]
    EmptyGrid,

    #[error("series for the truncation gap of error ({i},{j}) does not converge")]
    DivergentSeries { i: usize, j: usize },
}
