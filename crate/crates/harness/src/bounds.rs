//! Measured regret against the theoretical bounds.

use serde::Serialize;

use crate::run::{AggregateResult, VariantResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub variant: String,
    pub algorithm: String,
    pub mean_regret: f64,
    pub regret_se: f64,
    pub max_regret: f64,
    pub bound: f64,
    /// `bound - mean_regret`.
    pub margin: f64,
    /// Replications whose own regret exceeded the bound.
    pub runs_above_bound: usize,
    pub holds: bool,
}

/// One report per variant that carries a bound.
///
/// Full-feedback regret is deterministic given the losses, so every run must
/// respect the bound. Bandit regret is an expectation, so only the mean over
/// runs is compared.
pub fn check_bounds(result: &AggregateResult) -> Vec<BoundReport> {
    result.variants.iter().filter_map(report).collect()
}

fn report(v: &VariantResult) -> Option<BoundReport> {
    let bound = v.regret_bound?;
    let (mean, se) = v.mean_regret()?;
    let regrets = v.replications.iter().filter_map(|s| s.regret);
    let max_regret = regrets.clone().fold(f64::NEG_INFINITY, f64::max);
    let runs_above_bound = regrets.filter(|r| *r > bound).count();
    let holds = if v.algorithm == "experts" {
        runs_above_bound == 0
    } else {
        mean <= bound
    };
    Some(BoundReport {
        variant: v.name.clone(),
        algorithm: v.algorithm.clone(),
        mean_regret: mean,
        regret_se: se,
        max_regret,
        bound,
        margin: bound - mean,
        runs_above_bound,
        holds,
    })
}
