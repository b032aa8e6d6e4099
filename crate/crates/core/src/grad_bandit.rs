//! Gradient bandits for stochastic rewards.
//!
//! Three preference-update rules share one sampling step:
//!
//! * classical softmax: the played arm moves by `(1 - x_i)`, all others by `-x_j`;
//! * generalized GNL: every arm moves by `J[arm, i] / x_arm` with `J` the
//!   probability Jacobian of any GNL model;
//! * nested logit closed form: the three-case update for exclusive nests with
//!   `mu = 1`, algebraically equal to the generalized rule on that model.
//!
//! All updates are scaled by `alpha * (R - baseline)`, using the baseline from
//! before the reward is folded into it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gev::{ChoiceBreakdown, GnlModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradBanditKind {
    ClassicalSoftmax,
    GeneralizedGnl,
    NestedLogitClosedForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradBanditVariant {
    kind: GradBanditKind,
    model: GnlModel,
    alpha: f64,
}

impl GradBanditVariant {
    pub fn new(kind: GradBanditKind, model: GnlModel, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidVariant(format!("step size must be positive, got {alpha}")));
        }
        match kind {
            GradBanditKind::ClassicalSoftmax if !model.is_mnl() => {
                return Err(Error::InvalidVariant("classical softmax requires an MNL model".into()))
            }
            GradBanditKind::NestedLogitClosedForm if !model.is_nested_logit() => {
                return Err(Error::InvalidVariant(
                    "closed-form update requires exclusive nests with mu = 1".into(),
                ))
            }
            _ => {}
        }
        Ok(Self { kind, model, alpha })
    }

    pub fn kind(&self) -> GradBanditKind {
        self.kind
    }

    pub fn model(&self) -> &GnlModel {
        &self.model
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Preferences, running-mean baseline and reward count.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceState {
    prefs: Vec<f64>,
    baseline: f64,
    t: usize,
}

/// A sampled arm and the probabilities it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct GbSample {
    pub arm: usize,
    pub choice: ChoiceBreakdown,
}

impl PreferenceState {
    pub fn new(n: usize) -> Self {
        Self {
            prefs: vec![0.0; n],
            baseline: 0.0,
            t: 0,
        }
    }

    pub fn preferences(&self) -> &[f64] {
        &self.prefs
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    /// Rewards observed so far.
    pub fn steps(&self) -> usize {
        self.t
    }

    pub fn sample<R: Rng + ?Sized>(&self, variant: &GradBanditVariant, rng: &mut R) -> GbSample {
        self.sample_with(variant, rng.random::<f64>())
    }

    pub fn sample_with(&self, variant: &GradBanditVariant, uniform: f64) -> GbSample {
        let choice = variant.model.breakdown(&self.prefs, 1.0);
        GbSample {
            arm: choice.probabilities.sample_with(uniform),
            choice,
        }
    }

    /// Applies the variant's preference update, then the baseline update.
    pub fn update(&mut self, variant: &GradBanditVariant, sample: &GbSample, reward: f64) {
        match variant.kind {
            GradBanditKind::ClassicalSoftmax => {
                self.classical_update(sample.arm, reward, variant.alpha, &sample.choice.probabilities)
            }
            GradBanditKind::GeneralizedGnl => self.update_generic(variant, sample, reward),
            GradBanditKind::NestedLogitClosedForm => self.update_nl(variant, sample, reward),
        }
        self.baseline_update(reward);
    }

    /// Softmax update: `+d (1 - x_i)` on the played arm, `-d x_j` elsewhere.
    pub fn classical_update(&mut self, arm: usize, reward: f64, alpha: f64, probs: &[f64]) {
        let delta = alpha * (reward - self.baseline);
        for (j, (u, &x)) in self.prefs.iter_mut().zip(probs).enumerate() {
            if j == arm {
                *u += delta * (1.0 - x);
            } else {
                *u -= delta * x;
            }
        }
    }

    /// Jacobian-driven update for any GNL model (preferences only).
    pub fn update_generic(&mut self, variant: &GradBanditVariant, sample: &GbSample, reward: f64) {
        let jac = variant.model.jacobian_from(&sample.choice, 1.0);
        let x_arm = sample.choice.probabilities[sample.arm];
        let delta = variant.alpha * (reward - self.baseline);
        for (u, d) in self.prefs.iter_mut().zip(jac.row(sample.arm)) {
            *u += delta * d / x_arm;
        }
    }

    /// Closed-form nested logit update (preferences only).
    pub fn update_nl(&mut self, variant: &GradBanditVariant, sample: &GbSample, reward: f64) {
        let model = &variant.model;
        let arm = sample.arm;
        let l = model.nest_of(arm).expect("closed-form update needs exclusive nests");
        let nest = &model.nests()[l];
        let mu_l = nest.mu_ell();
        let x = sample.choice.probabilities.as_slice();
        let cond = sample.choice.conditional(l);
        let slot = nest.members().iter().position(|&i| i == arm).expect("arm in its nest");
        let x_cond = cond[slot];
        let delta = variant.alpha * (reward - self.baseline);

        let played = (1.0 - (1.0 - mu_l) * x_cond - mu_l * x[arm]) / mu_l;
        let same_nest = x[arm] + (1.0 - mu_l) / mu_l * x_cond;
        for (k, u) in self.prefs.iter_mut().enumerate() {
            if k == arm {
                *u += delta * played;
            } else if model.nest_of(k) == Some(l) {
                *u -= delta * (x[k] / x[arm] * same_nest);
            } else {
                *u -= delta * x[k];
            }
        }
    }

    /// Running mean: `baseline += (R - baseline) / t` with `t` the 1-based reward count.
    pub fn baseline_update(&mut self, reward: f64) {
        self.t += 1;
        self.baseline += (reward - self.baseline) / self.t as f64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn variant(kind: GradBanditKind, model: GnlModel, alpha: f64) -> GradBanditVariant {
        GradBanditVariant::new(kind, model, alpha).unwrap()
    }

    fn sample_at(state: &PreferenceState, v: &GradBanditVariant, arm: usize) -> GbSample {
        GbSample {
            arm,
            choice: v.model().breakdown(state.preferences(), 1.0),
        }
    }

    #[test]
    fn variant_requirements() {
        let nl = GnlModel::nested_logit(&[vec![0, 1], vec![2]], &[0.5, 1.0]).unwrap();
        assert!(GradBanditVariant::new(GradBanditKind::ClassicalSoftmax, nl.clone(), 0.1).is_err());
        assert!(GradBanditVariant::new(GradBanditKind::NestedLogitClosedForm, nl.clone(), 0.1).is_ok());
        assert!(GradBanditVariant::new(GradBanditKind::GeneralizedGnl, nl, 0.0).is_err());
        let mnl_half = GnlModel::mnl(3, 0.5).unwrap();
        assert!(GradBanditVariant::new(GradBanditKind::NestedLogitClosedForm, mnl_half.clone(), 0.1).is_err());
        assert!(GradBanditVariant::new(GradBanditKind::ClassicalSoftmax, mnl_half, 0.1).is_ok());
    }

    #[test]
    fn generic_update_two_arm_example() {
        let v = variant(GradBanditKind::GeneralizedGnl, GnlModel::mnl(2, 1.0).unwrap(), 0.1);
        let mut s = PreferenceState::new(2);
        let sample = sample_at(&s, &v, 0);
        s.update_generic(&v, &sample, 1.0);
        assert!((s.preferences()[0] - 0.05).abs() < 1e-15);
        assert!((s.preferences()[1] + 0.05).abs() < 1e-15);
    }

    #[test]
    fn classical_examples() {
        let mut s = PreferenceState::new(3);
        s.classical_update(1, 1.0, 0.3, &[1.0 / 3.0; 3]);
        let expect = [-0.1, 0.2, -0.1];
        for (a, b) in s.preferences().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(s.preferences().iter().sum::<f64>().abs() < 1e-15);
        let before = s.clone();
        s.classical_update(0, 5.0, 0.0, &[0.2, 0.3, 0.5]);
        assert_eq!(s, before);
    }

    #[test]
    fn no_change_when_reward_equals_baseline() {
        let model = GnlModel::nested_logit(&[vec![0, 1], vec![2, 3]], &[0.4, 0.7]).unwrap();
        for kind in [GradBanditKind::GeneralizedGnl, GradBanditKind::NestedLogitClosedForm] {
            let v = variant(kind, model.clone(), 0.3);
            let mut s = PreferenceState::new(4);
            s.baseline = 2.5;
            s.prefs = vec![0.1, -0.3, 0.7, 0.0];
            let sample = sample_at(&s, &v, 2);
            let before = s.prefs.clone();
            s.update_generic(&v, &sample, 2.5);
            s.update_nl(&v, &sample, 2.5);
            assert_eq!(s.prefs, before);
        }
    }

    #[test]
    fn baseline_is_running_mean() {
        let mut s = PreferenceState::new(1);
        s.baseline_update(1.0);
        assert_eq!(s.baseline(), 1.0);
        s.baseline_update(3.0);
        assert_eq!(s.baseline(), 2.0);
        let mut c = PreferenceState::new(1);
        for _ in 0..50 {
            c.baseline_update(-0.7);
            assert!((c.baseline() + 0.7).abs() < 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rewards: Vec<f64> = (0..100).map(|_| rng.random_range(-10.0..10.0)).collect();
        let mut r = PreferenceState::new(1);
        for &x in &rewards {
            r.baseline_update(x);
        }
        let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
        assert!((r.baseline() - mean).abs() < 1e-12);
        assert_eq!(r.steps(), 100);
    }

    #[test]
    fn update_uses_pre_update_baseline() {
        let v = variant(GradBanditKind::ClassicalSoftmax, GnlModel::mnl(2, 1.0).unwrap(), 0.5);
        let mut s = PreferenceState::new(2);
        let sample = s.sample_with(&v, 0.1);
        assert_eq!(sample.arm, 0);
        s.update(&v, &sample, 2.0);
        // delta = 0.5 * (2 - 0), x = 0.5
        assert!((s.preferences()[0] - 0.5).abs() < 1e-15);
        assert_eq!(s.baseline(), 2.0);
    }

    #[test]
    fn nl_played_and_same_nest_magnitudes() {
        let model = GnlModel::nested_logit(&[vec![0, 1, 2], vec![3, 4]], &[0.3, 0.6]).unwrap();
        let v = variant(GradBanditKind::NestedLogitClosedForm, model, 1.0);
        let mut s = PreferenceState::new(5);
        s.prefs = vec![0.4, -0.2, 1.0, 0.3, -0.5];
        let sample = sample_at(&s, &v, 1);
        let x = sample.choice.probabilities.clone();
        let before = s.prefs.clone();
        s.update_nl(&v, &sample, 1.0);
        let d: Vec<f64> = s.prefs.iter().zip(&before).map(|(a, b)| a - b).collect();
        assert!(d[1] >= 1.0 - x[1]);
        assert!(d[0] <= -x[0] && d[2] <= -x[2]);
        assert!((d[3] + x[3]).abs() < 1e-15 && (d[4] + x[4]).abs() < 1e-15);
        assert!(d.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn trivial_nests_reproduce_classical_updates() {
        let singletons: Vec<Vec<usize>> = (0..4).map(|i| vec![i]).collect();
        let nl = GnlModel::nested_logit(&singletons, &[1.0; 4]).unwrap();
        let closed = variant(GradBanditKind::NestedLogitClosedForm, nl, 0.2);
        let classical = variant(GradBanditKind::ClassicalSoftmax, GnlModel::mnl(4, 1.0).unwrap(), 0.2);
        let mut a = PreferenceState::new(4);
        let mut b = PreferenceState::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..500 {
            let uni = rng.random::<f64>();
            let reward = rng.random_range(-3.0..3.0);
            let sa = a.sample_with(&closed, uni);
            let sb = b.sample_with(&classical, uni);
            assert_eq!(sa.arm, sb.arm);
            a.update(&closed, &sa, reward);
            b.update(&classical, &sb, reward);
            assert_eq!(a, b);
        }
    }
}
