use choicebandit_core::grad_bandit::{GbSample, GradBanditKind, GradBanditVariant, PreferenceState};
use choicebandit_core::GnlModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_nl(rng: &mut ChaCha8Rng) -> GnlModel {
    let n = rng.random_range(2..12);
    let k = rng.random_range(1..=n);
    let mut partition: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in 0..n {
        partition[if i < k { i } else { rng.random_range(0..k) }].push(i);
    }
    let mus: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..=1.0)).collect();
    GnlModel::nested_logit(&partition, &mus).unwrap()
}

/// Runs `steps` updates from `prefs`/`baseline`-free start to reach a random state.
fn random_state(rng: &mut ChaCha8Rng, v: &GradBanditVariant, steps: usize) -> PreferenceState {
    let mut s = PreferenceState::new(v.model().n());
    for _ in 0..steps {
        let sample = s.sample(v, rng);
        let r = rng.random_range(-3.0..3.0);
        s.update(v, &sample, r);
    }
    s
}

fn forced(state: &PreferenceState, v: &GradBanditVariant, arm: usize) -> GbSample {
    GbSample {
        arm,
        choice: v.model().breakdown(state.preferences(), 1.0),
    }
}

fn delta(before: &PreferenceState, after: &PreferenceState) -> Vec<f64> {
    after
        .preferences()
        .iter()
        .zip(before.preferences())
        .map(|(a, b)| a - b)
        .collect()
}

#[test]
fn updates_sum_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..200 {
        let model = random_nl(&mut rng);
        let n = model.n();
        let mut variants = vec![
            GradBanditVariant::new(GradBanditKind::GeneralizedGnl, model.clone(), 0.3).unwrap(),
            GradBanditVariant::new(GradBanditKind::NestedLogitClosedForm, model, 0.3).unwrap(),
        ];
        variants.push(GradBanditVariant::new(GradBanditKind::ClassicalSoftmax, GnlModel::mnl(n, 1.0).unwrap(), 0.3).unwrap());
        for v in &variants {
            let mut s = PreferenceState::new(n);
            for _ in 0..50 {
                let before = s.clone();
                let sample = s.sample(v, &mut rng);
                s.update(v, &sample, rng.random_range(-5.0..5.0));
                assert!(delta(&before, &s).iter().sum::<f64>().abs() < 1e-10);
            }
        }
    }
}

#[test]
fn reduction_chain_over_shared_randomness() {
    let n = 7;
    let singletons: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let chain = [
        GradBanditVariant::new(
            GradBanditKind::NestedLogitClosedForm,
            GnlModel::nested_logit(&singletons, &[1.0; 7]).unwrap(),
            0.1,
        )
        .unwrap(),
        GradBanditVariant::new(GradBanditKind::GeneralizedGnl, GnlModel::mnl(n, 1.0).unwrap(), 0.1).unwrap(),
        GradBanditVariant::new(GradBanditKind::ClassicalSoftmax, GnlModel::mnl(n, 1.0).unwrap(), 0.1).unwrap(),
    ];
    let means: Vec<f64> = (0..n).map(|i| i as f64 * 0.5).collect();
    let mut states: Vec<PreferenceState> = chain.iter().map(|_| PreferenceState::new(n)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..1000 {
        let uniform: f64 = rng.random();
        let noise: f64 = rng.random_range(-1.0..1.0);
        let mut arms = Vec::new();
        for (s, v) in states.iter_mut().zip(&chain) {
            let sample = s.sample_with(v, uniform);
            arms.push(sample.arm);
            s.update(v, &sample, means[sample.arm] + noise);
        }
        assert!(arms.windows(2).all(|w| w[0] == w[1]));
        for s in &states[1..] {
            for (a, b) in s.preferences().iter().zip(states[0].preferences()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn closed_form_matches_jacobian_update() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..10_000 {
        let model = random_nl(&mut rng);
        let generic = GradBanditVariant::new(GradBanditKind::GeneralizedGnl, model.clone(), 0.4).unwrap();
        let closed = GradBanditVariant::new(GradBanditKind::NestedLogitClosedForm, model, 0.4).unwrap();
        let steps = rng.random_range(0..20);
        let state = random_state(&mut rng, &generic, steps);
        let arm = rng.random_range(0..generic.model().n());
        let reward = rng.random_range(-5.0..5.0);
        let sample = forced(&state, &generic, arm);
        let mut a = state.clone();
        let mut b = state.clone();
        a.update(&generic, &sample, reward);
        b.update(&closed, &sample, reward);
        for (x, y) in a.preferences().iter().zip(b.preferences()) {
            assert!((x - y).abs() < 1e-9);
        }
        assert_eq!(a.baseline(), b.baseline());
    }
}

#[test]
fn closed_form_magnitudes() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..10_000 {
        let model = random_nl(&mut rng);
        let v = GradBanditVariant::new(GradBanditKind::NestedLogitClosedForm, model.clone(), 1.0).unwrap();
        let steps = rng.random_range(0..10);
        let state = random_state(&mut rng, &v, steps);
        let arm = rng.random_range(0..model.n());
        let reward = state.baseline() + rng.random_range(0.1..3.0);
        let gap = reward - state.baseline();
        let sample = forced(&state, &v, arm);
        let x = sample.choice.probabilities.clone();
        let mut after = state.clone();
        after.update(&v, &sample, reward);
        let d = delta(&state, &after);
        let tol = 1e-12 * (1.0 + d[arm].abs());
        assert!(d[arm] / gap >= 1.0 - x[arm] - tol);
        let nest = model.nest_of(arm);
        for k in (0..model.n()).filter(|&k| k != arm && model.nest_of(k) == nest) {
            assert!(-d[k] >= x[k] * gap - 1e-12 * (1.0 + d[k].abs()));
        }
    }
}

#[test]
fn expected_update_is_the_reward_gradient() {
    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    for _ in 0..200 {
        let model = random_nl(&mut rng);
        let n = model.n();
        let alpha = 0.2;
        let v = GradBanditVariant::new(GradBanditKind::GeneralizedGnl, model.clone(), alpha).unwrap();
        let steps = rng.random_range(0..10);
        let state = random_state(&mut rng, &v, steps);
        let means: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x = model.choice_probabilities(state.preferences(), 1.0);
        let mut expected = vec![0.0; n];
        for arm in 0..n {
            let mut s = state.clone();
            s.update(&v, &forced(&state, &v, arm), means[arm]);
            for (e, d) in expected.iter_mut().zip(delta(&state, &s)) {
                *e += x[arm] * d;
            }
        }
        // alpha * d/du_j sum_i x_i (r_i - baseline), by central differences
        let value = |u: &[f64]| -> f64 {
            let p = model.choice_probabilities(u, 1.0);
            p.iter().zip(&means).map(|(pi, r)| pi * (r - state.baseline())).sum()
        };
        let mut u = state.preferences().to_vec();
        for j in 0..n {
            let orig = u[j];
            u[j] = orig + h;
            let up = value(&u);
            u[j] = orig - h;
            let down = value(&u);
            u[j] = orig;
            let grad = alpha * (up - down) / (2.0 * h);
            assert!((expected[j] - grad).abs() < 1e-6, "{} vs {grad}", expected[j]);
        }
    }
}

#[test]
fn preferences_stay_finite() {
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    let nl = GnlModel::nested_logit(&[vec![0, 1, 2], vec![3, 4], vec![5]], &[0.2, 0.5, 1.0]).unwrap();
    let variants = [
        GradBanditVariant::new(GradBanditKind::ClassicalSoftmax, GnlModel::mnl(6, 1.0).unwrap(), 0.5).unwrap(),
        GradBanditVariant::new(GradBanditKind::GeneralizedGnl, nl.clone(), 0.5).unwrap(),
        GradBanditVariant::new(GradBanditKind::NestedLogitClosedForm, nl, 0.5).unwrap(),
    ];
    for v in &variants {
        let mut s = PreferenceState::new(6);
        for _ in 0..100_000 {
            let sample = s.sample(v, &mut rng);
            let r = rng.random_range(-10.0..=10.0);
            s.update(v, &sample, r);
        }
        assert!(s.preferences().iter().all(|u| u.is_finite()));
        assert!(s.baseline().is_finite());
    }
}
