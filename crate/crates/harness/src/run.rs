//! Seeded, parallel replications and their aggregation.
//!
//! Replication `b` draws its environment from the stream `(seed, b, env)` and
//! a second stream `(seed, b, noise)` pre-draws one sampling uniform per step
//! and one standard normal per (step, arm). Every variant in the replication
//! consumes those same numbers, so identical learners follow identical paths
//! and different learners face identical rewards for identical choices.

use choicebandit_core::adv_bandit::{bandit_regret_bound, expected_regret, BanditState};
use choicebandit_core::envs::{make_adversarial_losses, LossMatrix, StochasticEnv};
use choicebandit_core::experts::{experts_regret_bound, ExpertsState};
use choicebandit_core::grad_bandit::{GradBanditVariant, PreferenceState};
use choicebandit_core::simplex::dot;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Agent, ExperimentConfig, Prepared, PreparedEnv};
use crate::error::{HarnessError, Result};
use crate::seed::{stream, ENV_STREAM, NOISE_STREAM};

/// Summary windows cover at most this many final steps.
pub const TAIL_WINDOW: usize = 1000;
const CHUNK: usize = 64;

/// Everything one variant produced in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub rewards: Vec<f64>,
    /// 1 or 0 for sampled arms; the weight on the best arm for full-feedback learners.
    pub optimal: Vec<f64>,
    /// Final preferences, estimated or cumulative rewards.
    pub final_values: Vec<f64>,
    pub final_probabilities: Vec<f64>,
    pub arm_reward_sum: Vec<f64>,
    pub arm_pulls: Vec<u64>,
    pub min_probability: f64,
    pub regret: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub index: usize,
    pub env_means: Option<Vec<f64>>,
    pub optimal_arm: usize,
    pub traces: Vec<Trace>,
}

/// Per-replication scalars, kept for paired comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicationSummary {
    pub average_reward: f64,
    pub pct_optimal: f64,
    pub tail_average_reward: f64,
    pub tail_pct_optimal: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regret: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Learned {
    /// Mean final preferences (or cumulative/estimated rewards) per arm.
    pub values: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// Mean observed reward per arm, over replications that pulled it.
    pub arm_reward_means: Vec<Option<f64>>,
    pub pulls: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantResult {
    pub name: String,
    pub algorithm: String,
    pub rate_name: String,
    pub rate: f64,
    #[serde(skip)]
    pub mean_reward: Vec<f64>,
    #[serde(skip)]
    pub reward_se: Vec<f64>,
    #[serde(skip)]
    pub pct_optimal: Vec<f64>,
    #[serde(skip)]
    pub pct_optimal_se: Vec<f64>,
    pub total_average_reward: f64,
    pub mean_pct_optimal: f64,
    pub learned: Learned,
    pub min_sampled_probability: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regret_bound: Option<f64>,
    #[serde(skip)]
    pub replications: Vec<ReplicationSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateResult {
    pub name: String,
    pub steps: usize,
    pub replications: usize,
    pub seed: u64,
    pub n: usize,
    /// Mean of the environment means across replications, for stochastic runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub env_means: Option<Vec<f64>>,
    pub variants: Vec<VariantResult>,
}

impl AggregateResult {
    pub fn variant(&self, name: &str) -> Option<&VariantResult> {
        self.variants.iter().find(|v| v.name == name)
    }
}

impl VariantResult {
    pub fn mean_regret(&self) -> Option<(f64, f64)> {
        let r: Vec<f64> = self.replications.iter().filter_map(|s| s.regret).collect();
        (r.len() == self.replications.len() && !r.is_empty()).then(|| mean_and_se(&r))
    }
}

/// Sample mean and its standard error.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean and standard error of the per-replication difference `f(a) - f(b)`.
pub fn paired_gap<F>(a: &VariantResult, b: &VariantResult, f: F) -> (f64, f64)
where
    F: Fn(&ReplicationSummary) -> f64,
{
    let d: Vec<f64> = a
        .replications
        .iter()
        .zip(&b.replications)
        .map(|(x, y)| f(x) - f(y))
        .collect();
    mean_and_se(&d)
}

/// Runs every replication, on `threads` workers if given, and aggregates in index order.
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<AggregateResult> {
    let prep = cfg.prepare()?;
    let work = || -> Result<AggregateResult> {
        let mut acc = Aggregator::new(cfg, &prep);
        let mut lo = 0;
        while lo < cfg.replications {
            let hi = (lo + CHUNK).min(cfg.replications);
            let chunk: Vec<Result<Replication>> = (lo..hi)
                .into_par_iter()
                .map(|b| run_replication(&prep, cfg.steps, cfg.seed, b))
                .collect();
            for rep in chunk {
                acc.add(rep?);
            }
            lo = hi;
        }
        Ok(acc.finish(cfg, &prep))
    };
    match threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// One replication of every variant.
pub fn run_replication(prep: &Prepared, steps: usize, seed: u64, b: usize) -> Result<Replication> {
    let n = prep.env.n();
    let mut crn = stream(seed, b, NOISE_STREAM);
    let uniforms: Vec<f64> = (0..steps).map(|_| crn.random()).collect();
    match &prep.env {
        PreparedEnv::Stochastic(family) => {
            let env = family.build(&mut stream(seed, b, ENV_STREAM));
            let noise: Vec<f64> = (0..steps * n).map(|_| StandardNormal.sample(&mut crn)).collect();
            let traces = prep
                .agents
                .iter()
                .map(|agent| match agent {
                    Agent::Gradient(v) => Ok(gradient_trace(v, &env, &uniforms, &noise)),
                    _ => Err(HarnessError::Config("stochastic runs take gradient bandits only".into())),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Replication {
                index: b,
                env_means: Some(env.means().to_vec()),
                optimal_arm: env.optimal_arm(),
                traces,
            })
        }
        PreparedEnv::Adversarial { kind, n } => {
            let losses = make_adversarial_losses(*kind, *n, steps, &mut stream(seed, b, ENV_STREAM))?;
            adversarial_replication(prep, &losses, &uniforms, b)
        }
        PreparedEnv::Fixed(m) => {
            let rows = (0..steps).map(|t| m.row(t).to_vec()).collect();
            let losses = LossMatrix::new(m.n(), rows)?;
            adversarial_replication(prep, &losses, &uniforms, b)
        }
    }
}

fn gradient_trace(v: &GradBanditVariant, env: &StochasticEnv, uniforms: &[f64], noise: &[f64]) -> Trace {
    let n = env.n();
    let steps = uniforms.len();
    let best = env.optimal_arm();
    let mut s = PreferenceState::new(n);
    let mut tr = Trace::new(n, steps);
    for (t, &uni) in uniforms.iter().enumerate() {
        let sample = s.sample_with(v, uni);
        let arm = sample.arm;
        tr.min_probability = tr.min_probability.min(sample.choice.probabilities[arm]);
        let r = env.reward_from_noise(arm, noise[t * n + arm]);
        tr.pull(arm, r, arm == best);
        s.update(v, &sample, r);
    }
    tr.final_probabilities = v.model().choice_probabilities(s.preferences(), 1.0).into_inner();
    tr.final_values = s.preferences().to_vec();
    tr
}

fn adversarial_replication(prep: &Prepared, losses: &LossMatrix, uniforms: &[f64], b: usize) -> Result<Replication> {
    let best = losses.best_arm();
    let traces = prep
        .agents
        .iter()
        .map(|agent| match agent {
            Agent::Experts { model, eta } => experts_trace(model, *eta, losses, best),
            Agent::Bandit { model, eta } => bandit_trace(model, *eta, losses, uniforms, best),
            Agent::Gradient(_) => Err(HarnessError::Config("adversarial runs take experts or bandits".into())),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Replication {
        index: b,
        env_means: None,
        optimal_arm: best,
        traces,
    })
}

fn experts_trace(model: &choicebandit_core::GnlModel, eta: f64, losses: &LossMatrix, best: usize) -> Result<Trace> {
    let n = losses.n();
    let mut s = ExpertsState::new(n, 1.0);
    let mut tr = Trace::new(n, losses.steps());
    for t in 0..losses.steps() {
        let x = s.decide(model, eta);
        let row = losses.row(t);
        tr.min_probability = tr.min_probability.min(x.iter().copied().fold(f64::INFINITY, f64::min));
        tr.rewards.push(dot(&x, row));
        tr.optimal.push(x[best]);
        s.observe(row)?;
    }
    tr.regret = Some(s.regret());
    tr.final_probabilities = model.choice_probabilities(s.cumulative(), eta).into_inner();
    tr.final_values = s.cumulative().to_vec();
    Ok(tr)
}

fn bandit_trace(
    model: &choicebandit_core::GnlModel,
    eta: f64,
    losses: &LossMatrix,
    uniforms: &[f64],
    best: usize,
) -> Result<Trace> {
    let n = losses.n();
    let mut s = BanditState::new(n);
    let mut tr = Trace::new(n, losses.steps());
    let mut history = Vec::with_capacity(losses.steps());
    for (t, &uni) in uniforms.iter().enumerate().take(losses.steps()) {
        let row = losses.row(t);
        let step = s.step_with_uniform(model, eta, |a| row[a], uni)?;
        tr.min_probability = tr.min_probability.min(step.probabilities[step.arm]);
        tr.pull(step.arm, step.value, step.arm == best);
        history.push(step.probabilities);
    }
    tr.regret = Some(expected_regret(&history, losses)?);
    tr.final_probabilities = s.distribution(model, eta).into_inner();
    tr.final_values = s.estimates().to_vec();
    Ok(tr)
}

impl Trace {
    fn new(n: usize, steps: usize) -> Self {
        Self {
            rewards: Vec::with_capacity(steps),
            optimal: Vec::with_capacity(steps),
            final_values: Vec::new(),
            final_probabilities: Vec::new(),
            arm_reward_sum: vec![0.0; n],
            arm_pulls: vec![0; n],
            min_probability: f64::INFINITY,
            regret: None,
        }
    }

    fn pull(&mut self, arm: usize, reward: f64, best: bool) {
        self.rewards.push(reward);
        self.optimal.push(if best { 1.0 } else { 0.0 });
        self.arm_reward_sum[arm] += reward;
        self.arm_pulls[arm] += 1;
    }

    pub fn summary(&self) -> ReplicationSummary {
        let steps = self.rewards.len();
        let tail = steps - steps.min(TAIL_WINDOW);
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        ReplicationSummary {
            average_reward: avg(&self.rewards),
            pct_optimal: avg(&self.optimal),
            tail_average_reward: avg(&self.rewards[tail..]),
            tail_pct_optimal: avg(&self.optimal[tail..]),
            regret: self.regret,
        }
    }
}

struct VariantAcc {
    sum_r: Vec<f64>,
    sumsq_r: Vec<f64>,
    sum_o: Vec<f64>,
    sumsq_o: Vec<f64>,
    values: Vec<f64>,
    probs: Vec<f64>,
    arm_mean_sum: Vec<f64>,
    arm_mean_count: Vec<usize>,
    pulls: Vec<f64>,
    min_p: f64,
    summaries: Vec<ReplicationSummary>,
}

struct Aggregator {
    count: usize,
    env_means: Option<Vec<f64>>,
    variants: Vec<VariantAcc>,
}

fn add_into(acc: &mut [f64], xs: &[f64]) {
    for (a, x) in acc.iter_mut().zip(xs) {
        *a += x;
    }
}

impl Aggregator {
    fn new(cfg: &ExperimentConfig, prep: &Prepared) -> Self {
        let (t, n) = (cfg.steps, prep.env.n());
        let blank = || VariantAcc {
            sum_r: vec![0.0; t],
            sumsq_r: vec![0.0; t],
            sum_o: vec![0.0; t],
            sumsq_o: vec![0.0; t],
            values: vec![0.0; n],
            probs: vec![0.0; n],
            arm_mean_sum: vec![0.0; n],
            arm_mean_count: vec![0; n],
            pulls: vec![0.0; n],
            min_p: f64::INFINITY,
            summaries: Vec::with_capacity(cfg.replications),
        };
        Self {
            count: 0,
            env_means: matches!(prep.env, PreparedEnv::Stochastic(_)).then(|| vec![0.0; n]),
            variants: prep.agents.iter().map(|_| blank()).collect(),
        }
    }

    fn add(&mut self, rep: Replication) {
        self.count += 1;
        if let (Some(acc), Some(m)) = (&mut self.env_means, &rep.env_means) {
            add_into(acc, m);
        }
        for (acc, tr) in self.variants.iter_mut().zip(&rep.traces) {
            for t in 0..tr.rewards.len() {
                let (r, o) = (tr.rewards[t], tr.optimal[t]);
                acc.sum_r[t] += r;
                acc.sumsq_r[t] += r * r;
                acc.sum_o[t] += o;
                acc.sumsq_o[t] += o * o;
            }
            add_into(&mut acc.values, &tr.final_values);
            add_into(&mut acc.probs, &tr.final_probabilities);
            for (arm, &p) in tr.arm_pulls.iter().enumerate() {
                acc.pulls[arm] += p as f64;
                if p > 0 {
                    acc.arm_mean_sum[arm] += tr.arm_reward_sum[arm] / p as f64;
                    acc.arm_mean_count[arm] += 1;
                }
            }
            acc.min_p = acc.min_p.min(tr.min_probability);
            acc.summaries.push(tr.summary());
        }
    }

    fn finish(self, cfg: &ExperimentConfig, prep: &Prepared) -> AggregateResult {
        let b = self.count as f64;
        let scale = |v: Vec<f64>| v.into_iter().map(|x| x / b).collect::<Vec<f64>>();
        let se = |sum: &[f64], sumsq: &[f64]| -> Vec<f64> {
            sum.iter()
                .zip(sumsq)
                .map(|(s, q)| {
                    if self.count < 2 {
                        return 0.0;
                    }
                    let var = ((q - s * s / b) / (b - 1.0)).max(0.0);
                    (var / b).sqrt()
                })
                .collect()
        };
        let n = prep.env.n();
        let variants = self
            .variants
            .iter()
            .zip(&prep.agents)
            .zip(&cfg.variants)
            .map(|((acc, agent), spec)| {
                let (rate_name, rate) = agent.rate();
                let regret_bound = match agent {
                    Agent::Gradient(_) => None,
                    Agent::Experts { model, eta } => Some(experts_regret_bound(model, *eta, 1.0, cfg.steps).at_eta),
                    Agent::Bandit { model, eta } => Some(bandit_regret_bound(model, *eta, n, cfg.steps)),
                };
                let (total_average_reward, _) = mean_and_se(&acc.summaries.iter().map(|s| s.average_reward).collect::<Vec<_>>());
                let (mean_pct_optimal, _) = mean_and_se(&acc.summaries.iter().map(|s| s.pct_optimal).collect::<Vec<_>>());
                VariantResult {
                    name: spec.name.clone(),
                    algorithm: spec.algorithm.label().to_string(),
                    rate_name: rate_name.to_string(),
                    rate,
                    mean_reward: scale(acc.sum_r.clone()),
                    reward_se: se(&acc.sum_r, &acc.sumsq_r),
                    pct_optimal: scale(acc.sum_o.clone()),
                    pct_optimal_se: se(&acc.sum_o, &acc.sumsq_o),
                    total_average_reward,
                    mean_pct_optimal,
                    learned: Learned {
                        values: scale(acc.values.clone()),
                        probabilities: scale(acc.probs.clone()),
                        arm_reward_means: acc
                            .arm_mean_sum
                            .iter()
                            .zip(&acc.arm_mean_count)
                            .map(|(s, &c)| (c > 0).then(|| s / c as f64))
                            .collect(),
                        pulls: scale(acc.pulls.clone()),
                    },
                    min_sampled_probability: acc.min_p,
                    regret_bound,
                    replications: acc.summaries.clone(),
                }
            })
            .collect();
        AggregateResult {
            name: cfg.name.clone(),
            steps: cfg.steps,
            replications: self.count,
            seed: cfg.seed,
            n,
            env_means: self.env_means.map(scale),
            variants,
        }
    }
}
