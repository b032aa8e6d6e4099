//! Full-feedback online learning over `n` experts.
//!
//! Each round plays `x_t = grad E(U_{t-1}; eta)`, the choice probabilities of
//! the model at the cumulative rewards, then observes the whole reward vector.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gev::GnlModel;
use crate::simplex::ProbVector;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertsState {
    cumulative: Vec<f64>,
    t: usize,
    realized_gain: f64,
    reward_bound: f64,
    pending: Option<ProbVector>,
}

impl ExpertsState {
    /// Fresh learner over `n` experts; rewards must satisfy `|u_i| <= reward_bound`.
    pub fn new(n: usize, reward_bound: f64) -> Self {
        assert!(n > 0, "at least one expert is required");
        assert!(reward_bound > 0.0, "reward bound must be positive");
        Self {
            cumulative: vec![0.0; n],
            t: 0,
            realized_gain: 0.0,
            reward_bound,
            pending: None,
        }
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn steps(&self) -> usize {
        self.t
    }

    pub fn realized_gain(&self) -> f64 {
        self.realized_gain
    }

    /// Decision for the next round.
    pub fn decide(&mut self, model: &GnlModel, eta: f64) -> ProbVector {
        let x = model.choice_probabilities(&self.cumulative, eta);
        self.pending = Some(x.clone());
        x
    }

    /// Records the reward vector of the round just decided.
    pub fn observe(&mut self, u: &[f64]) -> Result<()> {
        if u.len() != self.cumulative.len() {
            return Err(Error::Dimension {
                expected: self.cumulative.len(),
                got: u.len(),
            });
        }
        if let Some((arm, &value)) = u
            .iter()
            .enumerate()
            .find(|(_, v)| v.is_nan() || v.abs() > self.reward_bound)
        {
            return Err(Error::RewardBound {
                arm,
                value,
                bound: self.reward_bound,
            });
        }
        let x = self.pending.take().ok_or(Error::NoDecision)?;
        self.realized_gain += x.dot(u);
        for (c, v) in self.cumulative.iter_mut().zip(u) {
            *c += v;
        }
        self.t += 1;
        Ok(())
    }

    /// `max_i U_T(i) - sum_t <x_t, u_t>`.
    pub fn regret(&self) -> f64 {
        let best = self.cumulative.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        best - self.realized_gain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpertsBound {
    /// `eta * alpha + L K^2 T / eta`.
    pub at_eta: f64,
    /// `2 K sqrt(alpha L T)`.
    pub optimized: f64,
    /// `K sqrt(L T / alpha)`, the minimiser of `at_eta`.
    pub optimal_eta: f64,
}

/// Full-feedback regret bound with `alpha = E(0)` and the model's smoothness constant.
pub fn experts_regret_bound(model: &GnlModel, eta: f64, reward_bound: f64, steps: usize) -> ExpertsBound {
    let alpha = model.surplus_constants().alpha_exact;
    let l = model.smoothness_constant();
    let k2t = reward_bound * reward_bound * steps as f64;
    ExpertsBound {
        at_eta: eta * alpha + l * k2t / eta,
        optimized: 2.0 * (alpha * l * steps as f64).sqrt() * reward_bound,
        optimal_eta: reward_bound * (l * steps as f64 / alpha).sqrt(),
    }
}
