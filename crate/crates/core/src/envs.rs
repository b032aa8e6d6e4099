//! Reward-generating environments.
//!
//! Stochastic testbeds draw per-arm means once and add Gaussian noise on every
//! pull. Adversarial environments are fixed `T x n` loss matrices in `[-1, 0]`
//! (an oblivious adversary).

use std::io::Read;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::argmax;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnv")]
pub struct StochasticEnv {
    means: Vec<f64>,
    noise_sd: f64,
    #[serde(skip_serializing)]
    optimal_arm: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnv {
    means: Vec<f64>,
    #[serde(default = "unit")]
    noise_sd: f64,
}

fn unit() -> f64 {
    1.0
}

impl TryFrom<RawEnv> for StochasticEnv {
    type Error = Error;

    fn try_from(raw: RawEnv) -> Result<Self> {
        StochasticEnv::new(raw.means, raw.noise_sd)
    }
}

impl StochasticEnv {
    pub fn new(means: Vec<f64>, noise_sd: f64) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::InvalidEnvironment("no arms".into()));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidEnvironment("means must be finite".into()));
        }
        if !(noise_sd.is_finite() && noise_sd >= 0.0) {
            return Err(Error::InvalidEnvironment(format!("noise_sd must be >= 0, got {noise_sd}")));
        }
        let optimal_arm = argmax(&means);
        Ok(Self {
            means,
            noise_sd,
            optimal_arm,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "environment",
            msg: e.to_string(),
        })
    }

    pub fn n(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn optimal_arm(&self) -> usize {
        self.optimal_arm
    }

    /// `means[arm] + N(0, noise_sd^2)`.
    pub fn draw_reward<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.reward_from_noise(arm, z)
    }

    /// Reward for a pre-drawn standard normal `z`.
    pub fn reward_from_noise(&self, arm: usize, z: f64) -> f64 {
        self.means[arm] + self.noise_sd * z
    }
}

fn normal_means<R: Rng + ?Sized>(rng: &mut R, count: usize, mean: f64) -> Vec<f64> {
    let dist = Normal::new(mean, 1.0).expect("unit variance");
    (0..count).map(|_| dist.sample(rng)).collect()
}

/// Ten arms with means drawn from `N(4, 1)`.
pub fn make_mnl_env<R: Rng + ?Sized>(rng: &mut R) -> StochasticEnv {
    StochasticEnv::new(normal_means(rng, 10, 4.0), 1.0).expect("valid means")
}

/// Nine arms: arms 0..3 from `N(7.5, 1)`, arms 3..9 from `N(2.5, 1)`.
pub fn make_nl_env<R: Rng + ?Sized>(rng: &mut R) -> StochasticEnv {
    let mut means = normal_means(rng, 3, 7.5);
    means.extend(normal_means(rng, 6, 2.5));
    StochasticEnv::new(means, 1.0).expect("valid means")
}

/// 25 arms: arms 1..25 from `N(2.5, 1)`; arm 0 sits 2 above their maximum.
pub fn make_nl_large_env<R: Rng + ?Sized>(rng: &mut R) -> StochasticEnv {
    let others = normal_means(rng, 24, 2.5);
    let top = others.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 2.0;
    let mut means = Vec::with_capacity(25);
    means.push(top);
    means.extend(others);
    StochasticEnv::new(means, 1.0).expect("valid means")
}

/// Stochastic environment families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum EnvFamily {
    MnlEnv,
    NlEnv,
    NlLargeEnv,
    Custom(StochasticEnv),
}

impl EnvFamily {
    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> StochasticEnv {
        match self {
            EnvFamily::MnlEnv => make_mnl_env(rng),
            EnvFamily::NlEnv => make_nl_env(rng),
            EnvFamily::NlLargeEnv => make_nl_large_env(rng),
            EnvFamily::Custom(env) => env.clone(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            EnvFamily::MnlEnv => 10,
            EnvFamily::NlEnv => 9,
            EnvFamily::NlLargeEnv => 25,
            EnvFamily::Custom(env) => env.n(),
        }
    }
}

/// `T x n` matrix of per-step losses (negative rewards) in `[-1, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrix {
    n: usize,
    rows: Vec<f64>,
}

impl LossMatrix {
    pub fn new(n: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidEnvironment("no arms".into()));
        }
        let mut flat = Vec::with_capacity(rows.len() * n);
        for (t, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidEnvironment(format!(
                    "row {t} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (arm, &v) in row.iter().enumerate() {
                if !(-1.0..=0.0).contains(&v) {
                    return Err(Error::LossOutOfRange { arm, value: v });
                }
            }
            flat.extend(row);
        }
        Ok(Self { n, rows: flat })
    }

    /// Headerless CSV: one row per step, one column per arm.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Parse {
                what: "loss csv",
                msg: e.to_string(),
            })?;
            let row = record
                .iter()
                .map(|field| {
                    field.parse::<f64>().map_err(|e| Error::Parse {
                        what: "loss csv",
                        msg: format!("'{field}': {e}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        let n = rows.first().map_or(0, Vec::len);
        Self::new(n, rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> usize {
        self.rows.len() / self.n
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.rows[t * self.n..(t + 1) * self.n]
    }

    pub fn cumulative(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.n];
        for t in 0..self.steps() {
            for (acc, v) in total.iter_mut().zip(self.row(t)) {
                *acc += v;
            }
        }
        total
    }

    /// Arm with the largest cumulative reward (smallest total loss).
    pub fn best_arm(&self) -> usize {
        argmax(&self.cumulative())
    }
}

/// Generators of oblivious loss sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdversarialKind {
    /// Every entry i.i.d. uniform on `[-1, 0]`.
    UniformRandom,
    /// `best` loses about 0.1 per step, every other arm about 0.9.
    SingleBestArm { best: usize },
    /// The low-loss arm cycles through all arms, changing every `period` steps.
    SwitchingBest { period: usize },
}

const JITTER: f64 = 0.05;

pub fn make_adversarial_losses<R: Rng + ?Sized>(
    kind: AdversarialKind,
    n: usize,
    steps: usize,
    rng: &mut R,
) -> Result<LossMatrix> {
    if n == 0 {
        return Err(Error::InvalidEnvironment("no arms".into()));
    }
    let jittered = |centre: f64, rng: &mut R| (centre + rng.random_range(-JITTER..=JITTER)).clamp(-1.0, 0.0);
    let mut rows = Vec::with_capacity(steps);
    match kind {
        AdversarialKind::UniformRandom => {
            for _ in 0..steps {
                rows.push((0..n).map(|_| -rng.random::<f64>()).collect());
            }
        }
        AdversarialKind::SingleBestArm { best } => {
            if best >= n {
                return Err(Error::InvalidEnvironment(format!("best arm {best} out of range")));
            }
            for _ in 0..steps {
                rows.push(
                    (0..n)
                        .map(|i| jittered(if i == best { -0.1 } else { -0.9 }, rng))
                        .collect(),
                );
            }
        }
        AdversarialKind::SwitchingBest { period } => {
            if period == 0 {
                return Err(Error::InvalidEnvironment("period must be positive".into()));
            }
            for t in 0..steps {
                let best = (t / period) % n;
                rows.push(
                    (0..n)
                        .map(|i| jittered(if i == best { -0.1 } else { -0.9 }, rng))
                        .collect(),
                );
            }
        }
    }
    LossMatrix::new(n, rows)
}
