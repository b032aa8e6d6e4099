//! Adversarial bandits driven by a GNL surplus.
//!
//! Arms are sampled from `grad E(U_hat; eta)` over estimated cumulative
//! rewards, the single observed loss is importance weighted by the sampling
//! probability, and the estimate is added to `U_hat`. With an MNL model this is
//! Exp3. Observed values must lie in `[-1, 0]`.

use rand::Rng;

use crate::envs::LossMatrix;
use crate::error::{Error, Result};
use crate::gev::GnlModel;
use crate::simplex::ProbVector;

#[derive(Debug, Clone, PartialEq)]
pub struct BanditState {
    estimates: Vec<f64>,
    t: usize,
}

/// A single observed loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossObservation {
    arm: usize,
    value: f64,
}

impl LossObservation {
    pub fn new(arm: usize, value: f64) -> Result<Self> {
        if !(-1.0..=0.0).contains(&value) {
            return Err(Error::LossOutOfRange { arm, value });
        }
        Ok(Self { arm, value })
    }

    pub fn arm(&self) -> usize {
        self.arm
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

/// What happened in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditStep {
    pub arm: usize,
    pub value: f64,
    /// Distribution the arm was drawn from.
    pub probabilities: ProbVector,
}

impl BanditState {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "at least one arm is required");
        Self {
            estimates: vec![0.0; n],
            t: 0,
        }
    }

    /// Estimated cumulative rewards `U_hat`.
    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    pub fn steps(&self) -> usize {
        self.t
    }

    pub fn distribution(&self, model: &GnlModel, eta: f64) -> ProbVector {
        model.choice_probabilities(&self.estimates, eta)
    }

    /// Draws an arm by inverse CDF; returns it with the distribution used.
    pub fn sample<R: Rng + ?Sized>(&self, model: &GnlModel, eta: f64, rng: &mut R) -> (usize, ProbVector) {
        let p = self.distribution(model, eta);
        (p.sample(rng), p)
    }

    /// Adds an importance-weighted estimate to `U_hat`.
    pub fn update(&mut self, obs: LossObservation, probs: &ProbVector) {
        self.estimates[obs.arm] += obs.value / probs[obs.arm];
        self.t += 1;
    }

    /// One full round: sample, observe through `loss_of`, estimate, update.
    pub fn step<R, F>(&mut self, model: &GnlModel, eta: f64, loss_of: F, rng: &mut R) -> Result<BanditStep>
    where
        R: Rng + ?Sized,
        F: FnOnce(usize) -> f64,
    {
        let uniform = rng.random::<f64>();
        self.step_with_uniform(model, eta, loss_of, uniform)
    }

    /// [`BanditState::step`] with the sampling uniform supplied by the caller.
    pub fn step_with_uniform<F>(&mut self, model: &GnlModel, eta: f64, loss_of: F, uniform: f64) -> Result<BanditStep>
    where
        F: FnOnce(usize) -> f64,
    {
        let probabilities = self.distribution(model, eta);
        let arm = probabilities.sample_with(uniform);
        let value = loss_of(arm);
        let obs = LossObservation::new(arm, value)?;
        self.update(obs, &probabilities);
        Ok(BanditStep {
            arm,
            value,
            probabilities,
        })
    }
}

/// Importance-weighted gain: zero except `value / probs[arm]` at `arm`.
pub fn estimate_gain(obs: LossObservation, probs: &ProbVector) -> Vec<f64> {
    let mut gain = vec![0.0; probs.len()];
    gain[obs.arm] = obs.value / probs[obs.arm];
    gain
}

/// `max_i sum_t u_t(i) - sum_t <x_t, u_t>` for one run, given the sampling
/// distributions `x_t` and the full loss matrix.
pub fn expected_regret(history: &[ProbVector], losses: &LossMatrix) -> Result<f64> {
    if history.len() != losses.steps() {
        return Err(Error::Dimension {
            expected: losses.steps(),
            got: history.len(),
        });
    }
    let best = losses
        .cumulative()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut earned = 0.0;
    for (t, x) in history.iter().enumerate() {
        if x.len() != losses.n() {
            return Err(Error::Dimension {
                expected: losses.n(),
                got: x.len(),
            });
        }
        earned += x.dot(losses.row(t));
    }
    Ok(best - earned)
}

/// `eta * E(0) + n T / (eta * min mu_ell)`.
pub fn bandit_regret_bound(model: &GnlModel, eta: f64, n: usize, steps: usize) -> f64 {
    let e0 = model.surplus(&vec![0.0; model.n()], 1.0);
    eta * e0 + (n * steps) as f64 / (eta * model.min_mu_ell())
}

/// Minimiser `sqrt(n T / (min mu_ell * E(0)))` of [`bandit_regret_bound`].
pub fn optimal_bandit_eta(model: &GnlModel, n: usize, steps: usize) -> f64 {
    let e0 = model.surplus(&vec![0.0; model.n()], 1.0);
    ((n * steps) as f64 / (model.min_mu_ell() * e0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frequencies(state: &BanditState, model: &GnlModel, draws: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut counts = vec![0usize; model.n()];
        for _ in 0..draws {
            counts[state.sample(model, 1.0, &mut rng).0] += 1;
        }
        counts.iter().map(|&c| c as f64 / draws as f64).collect()
    }

    fn within_three_sigma(freq: f64, p: f64, draws: usize) -> bool {
        (freq - p).abs() <= 3.0 * (p * (1.0 - p) / draws as f64).sqrt()
    }

    #[test]
    fn sampling_frequencies() {
        let draws = 100_000;
        let mnl = GnlModel::mnl(4, 1.0).unwrap();
        for f in frequencies(&BanditState::new(4), &mnl, draws) {
            assert!(within_three_sigma(f, 0.25, draws), "{f}");
        }
        let two = GnlModel::mnl(2, 1.0).unwrap();
        let mut skewed = BanditState::new(2);
        skewed.estimates = vec![0.0, -10.0];
        let f = frequencies(&skewed, &two, draws);
        assert!(within_three_sigma(f[0], 1.0 / (1.0 + (-10f64).exp()), draws), "{f:?}");
        let nl = GnlModel::nested_logit(&[vec![0, 1], vec![2]], &[0.5, 1.0]).unwrap();
        let f = frequencies(&BanditState::new(3), &nl, draws);
        let expect = [0.292_893_218_813_452, 0.292_893_218_813_452, 0.414_213_562_373_095];
        for (fi, pi) in f.iter().zip(expect) {
            assert!(within_three_sigma(*fi, pi, draws), "{f:?}");
        }
    }

    #[test]
    fn gain_estimates() {
        let probs = ProbVector::new(vec![0.2, 0.5, 0.3]).unwrap();
        let obs = LossObservation::new(1, -0.5).unwrap();
        assert_eq!(estimate_gain(obs, &probs), vec![0.0, -1.0, 0.0]);
        let zero = LossObservation::new(2, 0.0).unwrap();
        assert_eq!(estimate_gain(zero, &probs), vec![0.0; 3]);
        assert!(LossObservation::new(0, 0.1).is_err());
        assert!(LossObservation::new(0, -1.5).is_err());
    }

    #[test]
    fn first_step_matches_exp3() {
        let eta = 2.0;
        let model = GnlModel::mnl(3, 1.0).unwrap();
        let mut state = BanditState::new(3);
        let losses = [-0.3, -0.6, -0.9];
        let step = state.step_with_uniform(&model, eta, |a| losses[a], 0.5).unwrap();
        // Exp3 with uniform weights picks the middle arm for u = 0.5
        assert_eq!(step.arm, 1);
        let w = [1.0f64, 1.0, 1.0];
        let p1 = w[1] / w.iter().sum::<f64>();
        let mut est = [0.0; 3];
        est[1] += -0.6 / p1;
        assert_eq!(state.estimates(), &est);
        let next = state.distribution(&model, eta);
        let ew: Vec<f64> = est.iter().map(|e| (e / eta).exp()).collect();
        let z: f64 = ew.iter().sum();
        for (a, b) in next.iter().zip(&ew) {
            assert!((a - b / z).abs() < 1e-15);
        }
    }

    #[test]
    fn estimates_stay_nonpositive_and_guard_rejects_gains() {
        let model = GnlModel::nested_logit(&[vec![0, 1], vec![2, 3]], &[0.3, 0.8]).unwrap();
        let mut state = BanditState::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in 0..1000 {
            let step = state.step(&model, 5.0, |a| -(((a + t) % 5) as f64) / 4.0, &mut rng).unwrap();
            assert!(step.probabilities.iter().all(|p| *p > 0.0));
            assert!(state.estimates().iter().all(|e| *e <= 0.0));
        }
        assert_eq!(state.steps(), 1000);
        let err = state.step(&model, 5.0, |_| 0.5, &mut rng);
        assert!(matches!(err, Err(Error::LossOutOfRange { .. })));
        assert_eq!(state.steps(), 1000);
    }

    #[test]
    fn expected_regret_examples() {
        let single = LossMatrix::new(1, vec![vec![-0.4]; 5]).unwrap();
        let history = vec![ProbVector::uniform(1); 5];
        assert_eq!(expected_regret(&history, &single).unwrap(), 0.0);

        let losses = LossMatrix::new(3, vec![vec![-0.1, -0.5, -0.9]; 10]).unwrap();
        let history = vec![ProbVector::uniform(3); 10];
        let r = expected_regret(&history, &losses).unwrap();
        assert!((r - (10.0 * -0.1 - 10.0 * -0.5)).abs() < 1e-12);
        assert!(expected_regret(&history[..3], &losses).is_err());
    }

    #[test]
    fn bound_examples() {
        let model = GnlModel::mnl(10, 1.0).unwrap();
        let b = bandit_regret_bound(&model, 1.0, 10, 1000);
        assert!((b - 10_002.302_585_092_993).abs() < 1e-9);
        assert!((bandit_regret_bound(&model, 3.0, 10, 0) - 3.0 * 10f64.ln()).abs() < 1e-12);
        let eta = optimal_bandit_eta(&model, 10, 1000);
        let best = bandit_regret_bound(&model, eta, 10, 1000);
        assert!((best - 2.0 * (10_000.0 * 10f64.ln()).sqrt()).abs() < 1e-9);
        for scale in [0.5, 0.9, 1.1, 2.0] {
            assert!(bandit_regret_bound(&model, eta * scale, 10, 1000) > best);
        }
    }
}
