//! Points of the probability simplex and inverse-CDF sampling from them.

use std::ops::Deref;

use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance on `sum(p) == 1` accepted by [`ProbVector::new`].
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A probability vector over `n` arms.
///
/// Vectors produced by the choice models are strictly positive unless an entry
/// underflows (utility gaps of several hundred nats).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidProbabilities("empty vector".into()));
        }
        if let Some(bad) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidProbabilities(format!("entry {bad} is not a probability")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidProbabilities(format!("entries sum to {total}")));
        }
        Ok(Self(p))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution over zero arms");
        Self(vec![1.0 / n as f64; n])
    }

    /// Wraps model output without re-validating.
    pub(crate) fn from_model(p: Vec<f64>) -> Self {
        Self(p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        dot(&self.0, v)
    }

    /// Inverse-CDF draw using a single uniform in `[0, 1)`.
    pub fn sample_with(&self, uniform: f64) -> usize {
        sample_index(&self.0, uniform)
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sample_with(rng.random::<f64>())
    }
}

impl Deref for ProbVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Returns the first index whose cumulative probability exceeds `uniform`.
///
/// Zero-probability arms are never returned. If rounding leaves the total mass
/// slightly below `uniform`, the last arm with positive mass is returned.
pub fn sample_index(probs: &[f64], uniform: f64) -> usize {
    let mut cumulative = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cumulative += p;
        if uniform < cumulative {
            return i;
        }
    }
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .expect("probability vector has no mass")
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot product of vectors with different lengths");
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
