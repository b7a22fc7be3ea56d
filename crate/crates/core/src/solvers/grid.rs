use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{exact_cost, simulate};
use crate::mdp::TruncatedMdp;
use crate::policy::{make_baseline, BaselineSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCandidate {
    pub spec: BaselineSpec,
    pub cost: f64,
    /// Batch-means half-width when the cost was simulated.
    pub half_width: Option<f64>,
}

impl GridCandidate {
    pub fn simulated(&self) -> bool {
        self.half_width.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub best: GridCandidate,
    pub candidates: Vec<GridCandidate>,
}

/// Evaluates each parameter choice and returns the cheapest (first on
/// ties). Exactly evaluable baselines are solved exactly; the others are
/// simulated for `horizon` slots with the same `seed`, so candidates see
/// identical source and channel realizations.
pub fn grid_search_baseline(grid: &[BaselineSpec], mdp: &TruncatedMdp, horizon: u64, seed: u64) -> Result<GridOutcome> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let candidates: Vec<GridCandidate> = grid
        .par_iter()
        .map(|spec| {
            let policy = make_baseline(spec, mdp)?;
            Ok(match exact_cost(mdp, &policy)? {
                Some(cost) => GridCandidate {
                    spec: *spec,
                    cost,
                    half_width: None,
                },
                None => {
                    let r = simulate(mdp, &policy, horizon, seed)?;
                    GridCandidate {
                        spec: *spec,
                        cost: r.mean_cost,
                        half_width: Some(r.half_width_95),
                    }
                }
            })
        })
        .collect::<Result<_>>()?;
    let best = candidates
        .iter()
        .fold(None::<&GridCandidate>, |best, c| match best {
            Some(b) if b.cost <= c.cost => Some(b),
            _ => Some(c),
        })
        .expect("non-empty")
        .clone();
    Ok(GridOutcome { best, candidates })
}
