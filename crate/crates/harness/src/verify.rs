//! Quick invariant and bound checks behind `choicebandit verify`.

use choicebandit_core::adv_bandit::{
    bandit_regret_bound, estimate_gain, expected_regret, optimal_bandit_eta, BanditState, LossObservation,
};
use choicebandit_core::envs::{make_adversarial_losses, AdversarialKind, LossMatrix};
use choicebandit_core::experts::{experts_regret_bound, ExpertsState};
use choicebandit_core::grad_bandit::{GbSample, GradBanditKind, GradBanditVariant, PreferenceState};
use choicebandit_core::{GnlModel, NestBuilder, ProbVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::presets;
use crate::run::{run_experiment, run_replication};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn random_nl(rng: &mut ChaCha8Rng, max_n: usize) -> GnlModel {
    let n = rng.random_range(2..=max_n);
    let k = rng.random_range(1..=n);
    let mut partition: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in 0..n {
        partition[if i < k { i } else { rng.random_range(0..k) }].push(i);
    }
    let mus: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..=1.0)).collect();
    GnlModel::nested_logit(&partition, &mus).expect("valid NL")
}

fn random_gnl(rng: &mut ChaCha8Rng, max_n: usize) -> GnlModel {
    let n = rng.random_range(2..=max_n);
    let nests = rng.random_range(2..=4);
    let mu = rng.random_range(0.5..1.5);
    let mut alloc: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nests];
    for i in 0..n {
        let a = rng.random_range(0..nests);
        let b = (a + 1) % nests;
        let s: f64 = rng.random_range(0.1..0.9);
        alloc[a].push((i, s));
        alloc[b].push((i, 1.0 - s));
    }
    let builders = alloc
        .into_iter()
        .enumerate()
        .filter(|(_, a)| !a.is_empty())
        .map(|(l, a)| NestBuilder::new(format!("n{l}"), mu * rng.random_range(0.2..=1.0), a))
        .collect();
    GnlModel::new(n, mu, builders).expect("valid GNL")
}

fn gradient_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for k in 0..200 {
        let model = if k % 2 == 0 { random_nl(&mut rng, 20) } else { random_gnl(&mut rng, 20) };
        let mut u: Vec<f64> = (0..model.n()).map(|_| rng.random_range(-50.0..=50.0)).collect();
        let p = model.choice_probabilities(&u, 1.0);
        for i in 0..model.n() {
            let orig = u[i];
            u[i] = orig + h;
            let up = model.surplus(&u, 1.0);
            u[i] = orig - h;
            let down = model.surplus(&u, 1.0);
            u[i] = orig;
            worst = worst.max(((up - down) / (2.0 * h) - p[i]).abs());
        }
    }
    check("gradient identity", worst < 1e-6, format!("max deviation {worst:.2e} (limit 1e-6)"))
}

fn differential_consistency() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut failures = 0;
    let mut worst = 0.0f64;
    for k in 0..6 {
        let model = if k % 2 == 0 { random_nl(&mut rng, 8) } else { random_gnl(&mut rng, 8) };
        let r = model.check_differential_consistency(1.0, 200, k);
        worst = worst.max(r.max_ratio / r.bound);
        failures += usize::from(!r.passed);
    }
    check(
        "differential consistency",
        failures == 0,
        format!("worst ratio/bound {worst:.4}, {failures} failing models"),
    )
}

fn experts_bound() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let models = [
        GnlModel::mnl(10, 1.0).expect("valid"),
        GnlModel::nested_logit(&[(0..5).collect(), (5..10).collect()], &[0.5, 0.5]).expect("valid"),
    ];
    let steps = 500;
    let mut violations = 0;
    let mut runs = 0;
    for model in &models {
        let eta = experts_regret_bound(model, 1.0, 1.0, steps).optimal_eta;
        let bound = experts_regret_bound(model, eta, 1.0, steps).at_eta;
        for _ in 0..20 {
            let mut s = ExpertsState::new(10, 1.0);
            for _ in 0..steps {
                s.decide(model, eta);
                let u: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..=1.0)).collect();
                s.observe(&u).expect("bounded rewards");
            }
            runs += 1;
            violations += usize::from(s.regret() > bound);
        }
    }
    check("experts regret bound", violations == 0, format!("{violations} of {runs} runs above bound"))
}

fn exp3_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let (mu, eta) = (1.0, 20.0);
    let model = GnlModel::mnl(6, mu).expect("valid");
    let mut s = BanditState::new(6);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let u = s.estimates();
        let m = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = u.iter().map(|v| ((v - m) / (mu * eta)).exp()).collect();
        let z: f64 = w.iter().sum();
        let losses: Vec<f64> = (0..6).map(|_| -rng.random::<f64>()).collect();
        let step = s.step(&model, eta, |a| losses[a], &mut rng).expect("valid loss");
        for (p, wi) in step.probabilities.iter().zip(&w) {
            worst = worst.max((p - wi / z).abs());
        }
    }
    check("Exp3 equivalence", worst <= 1e-12, format!("max deviation {worst:.2e}"))
}

fn adversarial_bound() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let model = GnlModel::nested_logit(&[vec![0, 1], vec![2, 3, 4]], &[0.5, 0.8]).expect("valid");
    let (n, steps) = (5, 300);
    let eta = optimal_bandit_eta(&model, n, steps);
    let bound = bandit_regret_bound(&model, eta, n, steps);
    let losses = make_adversarial_losses(AdversarialKind::SingleBestArm { best: 3 }, n, steps, &mut rng)
        .expect("valid generator");
    let reps = 100;
    let mut total = 0.0;
    for _ in 0..reps {
        let mut s = BanditState::new(n);
        let mut history = Vec::with_capacity(steps);
        for t in 0..steps {
            let step = s.step(&model, eta, |a| losses.row(t)[a], &mut rng).expect("valid loss");
            history.push(step.probabilities);
        }
        total += expected_regret(&history, &losses).expect("matching sizes");
    }
    let mean = total / reps as f64;
    check("adversarial regret bound", mean <= bound, format!("mean regret {mean:.2} <= bound {bound:.2}"))
}

fn reduction_identity() -> Check {
    let singletons: Vec<Vec<usize>> = (0..10).map(|i| vec![i]).collect();
    let nl = GradBanditVariant::new(
        GradBanditKind::NestedLogitClosedForm,
        GnlModel::nested_logit(&singletons, &[1.0; 10]).expect("valid"),
        0.1,
    )
    .expect("valid variant");
    let classical =
        GradBanditVariant::new(GradBanditKind::ClassicalSoftmax, GnlModel::mnl(10, 1.0).expect("valid"), 0.1)
            .expect("valid variant");
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let (mut a, mut b) = (PreferenceState::new(10), PreferenceState::new(10));
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let uni: f64 = rng.random();
        let r = rng.random_range(0.0..8.0);
        let (sa, sb) = (a.sample_with(&nl, uni), b.sample_with(&classical, uni));
        a.update(&nl, &sa, r);
        b.update(&classical, &sb, r);
        for (x, y) in a.preferences().iter().zip(b.preferences()) {
            worst = worst.max((x - y).abs());
        }
    }
    check("reduction identity", worst <= 1e-12, format!("max divergence {worst:.2e}"))
}

fn closed_form_vs_jacobian() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut worst = 0.0f64;
    for _ in 0..2000 {
        let model = random_nl(&mut rng, 12);
        let n = model.n();
        let g = GradBanditVariant::new(GradBanditKind::GeneralizedGnl, model.clone(), 0.3).expect("valid");
        let c = GradBanditVariant::new(GradBanditKind::NestedLogitClosedForm, model, 0.3).expect("valid");
        let mut s = PreferenceState::new(n);
        for _ in 0..rng.random_range(0..15) {
            let smp = s.sample(&g, &mut rng);
            s.update(&g, &smp, rng.random_range(-3.0..3.0));
        }
        let arm = rng.random_range(0..n);
        let smp = GbSample {
            arm,
            choice: g.model().breakdown(s.preferences(), 1.0),
        };
        let r = rng.random_range(-3.0..3.0);
        let (mut x, mut y) = (s.clone(), s);
        x.update(&g, &smp, r);
        y.update(&c, &smp, r);
        for (p, q) in x.preferences().iter().zip(y.preferences()) {
            worst = worst.max((p - q).abs());
        }
    }
    check("closed form vs Jacobian", worst < 1e-9, format!("max difference {worst:.2e}"))
}

fn estimator_unbiased() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..10);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let z: f64 = raw.iter().sum();
        let p = ProbVector::new(raw.iter().map(|v| v / z).collect()).expect("normalized");
        let u: Vec<f64> = (0..n).map(|_| -rng.random::<f64>()).collect();
        let mut mean = vec![0.0; n];
        for arm in 0..n {
            let g = estimate_gain(LossObservation::new(arm, u[arm]).expect("in range"), &p);
            for (m, gi) in mean.iter_mut().zip(g) {
                *m += p[arm] * gi;
            }
        }
        for (m, ui) in mean.iter().zip(&u) {
            worst = worst.max((m - ui).abs());
        }
    }
    check("estimator unbiasedness", worst <= 1e-12, format!("max deviation {worst:.2e}"))
}

fn path_enumeration() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let model = GnlModel::mnl(2, 1.0).expect("valid");
    let eta = 1.0;
    let rows: Vec<Vec<f64>> = (0..3).map(|_| vec![-rng.random::<f64>(), -rng.random::<f64>()]).collect();
    let losses = LossMatrix::new(2, rows).expect("valid losses");
    let mut via_history = 0.0;
    let mut realised = 0.0;
    for path in 0..8usize {
        let mut s = BanditState::new(2);
        let mut history = Vec::new();
        let mut weight = 1.0;
        let mut gained = 0.0;
        for t in 0..3 {
            let arm = (path >> t) & 1;
            let p = s.distribution(&model, eta);
            weight *= p[arm];
            let v = losses.row(t)[arm];
            gained += v;
            s.update(LossObservation::new(arm, v).expect("in range"), &p);
            history.push(p);
        }
        via_history += weight * expected_regret(&history, &losses).expect("sizes");
        realised += weight * gained;
    }
    let best = losses.cumulative().into_iter().fold(f64::NEG_INFINITY, f64::max);
    let diff = (via_history - (best - realised)).abs();
    check("expected regret by path enumeration", diff <= 1e-12, format!("difference {diff:.2e}"))
}

fn determinism() -> Check {
    let mut cfg = presets::e1();
    cfg.steps = 60;
    cfg.replications = 24;
    let runs = [Some(1), Some(4), Some(4)].map(|t| run_experiment(&cfg, t));
    let same = match &runs {
        [Ok(a), Ok(b), Ok(c)] => a == b && b == c,
        _ => false,
    };
    let prep = cfg.prepare().expect("valid preset");
    let mut worst = 0.0f64;
    if let Ok(agg) = &runs[0] {
        let mut sums = vec![vec![0.0; cfg.steps]; cfg.variants.len()];
        for b in 0..cfg.replications {
            let rep = run_replication(&prep, cfg.steps, cfg.seed, b).expect("valid replication");
            for (s, tr) in sums.iter_mut().zip(&rep.traces) {
                for (a, r) in s.iter_mut().zip(&tr.rewards) {
                    *a += r;
                }
            }
        }
        for (s, v) in sums.iter().zip(&agg.variants) {
            for (a, m) in s.iter().zip(&v.mean_reward) {
                worst = worst.max((a / cfg.replications as f64 - m).abs());
            }
        }
    }
    check(
        "determinism across thread counts",
        same && worst <= 1e-12,
        format!("identical results: {same}, serial reference deviation {worst:.2e}"),
    )
}

/// Runs every check; takes a few seconds.
pub fn run_all() -> Vec<Check> {
    vec![
        gradient_identity(),
        differential_consistency(),
        experts_bound(),
        exp3_equivalence(),
        adversarial_bound(),
        reduction_identity(),
        closed_form_vs_jacobian(),
        estimator_unbiased(),
        path_enumeration(),
        determinism(),
    ]
}
