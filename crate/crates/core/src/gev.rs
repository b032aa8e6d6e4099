//! Generalized nested logit (GNL) choice models.
//!
//! A model is described by a top-level scale `mu`, a set of nests with scale
//! `mu_ell <= mu`, and allocation shares `sigma[i][ell] >= 0` that sum to one
//! for every alternative. The generating function is
//!
//! ```text
//! G(x) = sum_ell ( sum_i (sigma_i,ell * x_i)^(1/mu_ell) )^(mu_ell/mu)
//! ```
//!
//! and the smoothed surplus is `E(u; eta) = eta * mu * ln G(exp(u / eta))`.
//! Its gradient is the vector of choice probabilities. Everything below is
//! evaluated in log space with max-shifted log-sum-exp, per nest and across
//! nests, so utilities of magnitude up to `1e6` stay finite.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::ProbVector;

/// Shares of one alternative must sum to one within this tolerance.
pub const SHARE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Nest {
    id: String,
    mu_ell: f64,
    members: Vec<usize>,
    shares: Vec<f64>,
    log_shares: Vec<f64>,
}

impl Nest {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn mu_ell(&self) -> f64 {
        self.mu_ell
    }

    /// Alternatives with a positive share in this nest, ascending.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// Shares aligned with [`Nest::members`].
    pub fn shares(&self) -> &[f64] {
        &self.shares
    }
}

/// Structural class of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Exclusive nests and `mu_ell == mu` everywhere: the multinomial logit.
    Mnl,
    /// Exclusive nests with `mu == 1`.
    NestedLogit,
    /// Anything else (fractional shares, or exclusive nests with `mu != 1`).
    General,
}

/// An immutable, validated GNL model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub struct GnlModel {
    n: usize,
    mu: f64,
    nests: Vec<Nest>,
    kind: ModelKind,
    /// Nest index per alternative when nests are exclusive.
    nest_of: Option<Vec<usize>>,
    /// Position of each alternative inside its nest when nests are exclusive.
    slot_of: Option<Vec<usize>>,
    /// Offsets of each nest's members in the flattened member list.
    offsets: Vec<usize>,
}

/// One nest as supplied by the caller: `(alternative, share)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct NestBuilder {
    pub id: String,
    pub mu_ell: f64,
    pub alloc: Vec<(usize, f64)>,
}

impl NestBuilder {
    pub fn new(id: impl Into<String>, mu_ell: f64, alloc: Vec<(usize, f64)>) -> Self {
        Self {
            id: id.into(),
            mu_ell,
            alloc,
        }
    }

    /// Nest holding each listed alternative with share one.
    pub fn exclusive(id: impl Into<String>, mu_ell: f64, members: &[usize]) -> Self {
        Self::new(id, mu_ell, members.iter().map(|&i| (i, 1.0)).collect())
    }
}

impl GnlModel {
    /// Validates and builds a model over alternatives `0..n`.
    pub fn new(n: usize, mu: f64, nests: Vec<NestBuilder>) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidModel(msg));
        if n == 0 {
            return invalid("a model needs at least one alternative".into());
        }
        if !(mu.is_finite() && mu > 0.0) {
            return invalid(format!("mu must be positive and finite, got {mu}"));
        }
        if nests.is_empty() {
            return invalid("a model needs at least one nest".into());
        }

        let mut share_sum = vec![0.0; n];
        let mut built = Vec::with_capacity(nests.len());
        for spec in nests {
            if !(spec.mu_ell.is_finite() && spec.mu_ell > 0.0) {
                return invalid(format!("nest '{}': mu_ell must be positive, got {}", spec.id, spec.mu_ell));
            }
            if spec.mu_ell > mu {
                return invalid(format!(
                    "nest '{}': mu_ell = {} exceeds mu = {}",
                    spec.id, spec.mu_ell, mu
                ));
            }
            let mut alloc = spec.alloc;
            alloc.sort_by_key(|&(i, _)| i);
            let mut members = Vec::with_capacity(alloc.len());
            let mut shares = Vec::with_capacity(alloc.len());
            for (pos, &(i, share)) in alloc.iter().enumerate() {
                if i >= n {
                    return invalid(format!("nest '{}': alternative {i} out of range 0..{n}", spec.id));
                }
                if pos > 0 && alloc[pos - 1].0 == i {
                    return invalid(format!("nest '{}': alternative {i} listed twice", spec.id));
                }
                if !(share.is_finite() && share >= 0.0) {
                    return invalid(format!("nest '{}': share of {i} must be >= 0, got {share}", spec.id));
                }
                share_sum[i] += share;
                // zero shares contribute nothing to G
                if share > 0.0 {
                    members.push(i);
                    shares.push(share);
                }
            }
            if members.is_empty() {
                return invalid(format!("nest '{}' has no alternative with a positive share", spec.id));
            }
            let log_shares = shares.iter().map(|s: &f64| s.ln()).collect();
            built.push(Nest {
                id: spec.id,
                mu_ell: spec.mu_ell,
                members,
                shares,
                log_shares,
            });
        }
        for (i, total) in share_sum.iter().enumerate() {
            if *total == 0.0 {
                return invalid(format!("alternative {i} belongs to no nest"));
            }
            if (total - 1.0).abs() > SHARE_TOLERANCE {
                return invalid(format!("shares of alternative {i} sum to {total}, not 1"));
            }
        }

        let exclusive = built.iter().all(|nest| nest.shares.iter().all(|&s| s == 1.0));
        let (nest_of, slot_of) = if exclusive {
            let mut nest_of = vec![0; n];
            let mut slot_of = vec![0; n];
            for (l, nest) in built.iter().enumerate() {
                for (slot, &i) in nest.members.iter().enumerate() {
                    nest_of[i] = l;
                    slot_of[i] = slot;
                }
            }
            (Some(nest_of), Some(slot_of))
        } else {
            (None, None)
        };
        let kind = if exclusive && built.iter().all(|nest| nest.mu_ell == mu) {
            ModelKind::Mnl
        } else if exclusive && mu == 1.0 {
            ModelKind::NestedLogit
        } else {
            ModelKind::General
        };
        let mut offsets = Vec::with_capacity(built.len() + 1);
        let mut acc = 0;
        for nest in &built {
            offsets.push(acc);
            acc += nest.members.len();
        }
        offsets.push(acc);

        Ok(Self {
            n,
            mu,
            nests: built,
            kind,
            nest_of,
            slot_of,
            offsets,
        })
    }

    /// Multinomial logit with scale `mu`: one singleton nest per alternative.
    pub fn mnl(n: usize, mu: f64) -> Result<Self> {
        let nests = (0..n)
            .map(|i| NestBuilder::exclusive(format!("a{i}"), mu, &[i]))
            .collect();
        Self::new(n, mu, nests)
    }

    /// Nested logit (`mu = 1`) over a partition of `0..n`.
    pub fn nested_logit(partition: &[Vec<usize>], mu_ell: &[f64]) -> Result<Self> {
        if partition.len() != mu_ell.len() {
            return Err(Error::InvalidModel(format!(
                "{} nests but {} nest parameters",
                partition.len(),
                mu_ell.len()
            )));
        }
        let n = partition.iter().flatten().max().map_or(0, |m| m + 1);
        let nests = partition
            .iter()
            .zip(mu_ell)
            .enumerate()
            .map(|(l, (members, &m))| NestBuilder::exclusive(format!("nest{l}"), m, members))
            .collect();
        Self::new(n, 1.0, nests)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "model",
            msg: e.to_string(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nests(&self) -> &[Nest] {
        &self.nests
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn is_mnl(&self) -> bool {
        self.kind == ModelKind::Mnl
    }

    /// Exclusive nests with `mu == 1` (every MNL with `mu == 1` qualifies).
    pub fn is_nested_logit(&self) -> bool {
        self.nest_of.is_some() && self.mu == 1.0
    }

    /// Nest containing alternative `i`, for exclusive-nest models.
    pub fn nest_of(&self, i: usize) -> Option<usize> {
        self.nest_of.as_ref().map(|v| v[i])
    }

    pub fn min_mu_ell(&self) -> f64 {
        self.nests.iter().map(|n| n.mu_ell).fold(f64::INFINITY, f64::min)
    }

    /// `G(x)` for strictly positive `x`.
    pub fn generating_value(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x.len())?;
        if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| v.is_nan() || **v <= 0.0) {
            return Err(Error::Domain { index, value });
        }
        let log_x: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        Ok((self.log_space(&log_x).top / self.mu).exp())
    }

    /// Smoothed surplus `eta * mu * ln G(exp(u / eta))`.
    pub fn surplus(&self, u: &[f64], eta: f64) -> f64 {
        self.assert_args(u.len(), eta);
        let z = scale(u, eta);
        eta * self.log_space(&z).top
    }

    /// Choice probabilities, i.e. the gradient of [`GnlModel::surplus`] in `u`.
    pub fn choice_probabilities(&self, u: &[f64], eta: f64) -> ProbVector {
        self.breakdown(u, eta).probabilities
    }

    /// Choice probabilities together with the nest and within-nest factors.
    pub fn breakdown(&self, u: &[f64], eta: f64) -> ChoiceBreakdown {
        self.assert_args(u.len(), eta);
        let z = scale(u, eta);
        let eval = self.log_space(&z);

        let nest_probabilities: Vec<f64> = eval
            .nest_scores
            .iter()
            .map(|w| (w - eval.top_scaled).exp())
            .collect();
        let mut conditional = Vec::with_capacity(eval.terms.len());
        let mut probabilities = vec![0.0; self.n];
        for (l, nest) in self.nests.iter().enumerate() {
            let lo = self.offsets[l];
            for (k, &i) in nest.members.iter().enumerate() {
                let c = (eval.terms[lo + k] - eval.nest_lse[l]).exp();
                conditional.push(c);
                probabilities[i] += nest_probabilities[l] * c;
            }
        }
        ChoiceBreakdown {
            probabilities: ProbVector::from_model(probabilities),
            nest_probabilities,
            conditional,
            offsets: self.offsets.clone(),
        }
    }

    /// Analytic Jacobian `d P_i / d u_j` of the choice probabilities.
    ///
    /// With `q_ell` the within-nest probability vector of nest `ell`,
    /// `J = (1/eta) * [diag(d) + sum_ell Phat_ell (1/mu - 1/mu_ell) q_ell q_ell^T - (1/mu) P P^T]`
    /// where `d_i = sum_ell Phat_ell q_ell,i / mu_ell`. The matrix is symmetric
    /// and its rows sum to zero.
    pub fn prob_jacobian(&self, u: &[f64], eta: f64) -> Jacobian {
        let b = self.breakdown(u, eta);
        self.jacobian_from(&b, eta)
    }

    /// Jacobian from an already computed breakdown at the same point.
    pub fn jacobian_from(&self, b: &ChoiceBreakdown, eta: f64) -> Jacobian {
        let n = self.n;
        let p = b.probabilities.as_slice();
        let inv_mu = 1.0 / self.mu;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = -inv_mu * p[i] * p[j];
            }
        }
        for (l, nest) in self.nests.iter().enumerate() {
            let phat = b.nest_probabilities[l];
            let q = b.conditional(l);
            let coupling = phat * (inv_mu - 1.0 / nest.mu_ell);
            for (a, &i) in nest.members.iter().enumerate() {
                data[i * n + i] += phat * q[a] / nest.mu_ell;
                for (c, &j) in nest.members.iter().enumerate() {
                    data[i * n + j] += coupling * q[a] * q[c];
                }
            }
        }
        if eta != 1.0 {
            for v in &mut data {
                *v /= eta;
            }
        }
        Jacobian { n, data }
    }

    /// Smoothness estimate `2 / min mu_ell - 1 / mu` (equals `1/mu` for MNL).
    pub fn smoothness_constant(&self) -> f64 {
        if self.is_mnl() {
            1.0 / self.mu
        } else {
            2.0 / self.min_mu_ell() - 1.0 / self.mu
        }
    }

    /// Differential-consistency constant `1 / min mu_ell`.
    pub fn diff_consistency_constant(&self) -> f64 {
        1.0 / self.min_mu_ell()
    }

    pub fn surplus_constants(&self) -> ModelConstants {
        let alpha_exact = self.surplus(&vec![0.0; self.n], 1.0);
        let ln_n = (self.n as f64).ln();
        let (alpha_lower, alpha_upper) = if self.is_mnl() {
            (self.mu * ln_n, self.mu * ln_n)
        } else {
            let total: f64 = self
                .nests
                .iter()
                .flat_map(|nest| nest.shares.iter())
                .map(|s| s.powf(1.0 / self.mu))
                .sum();
            let upper = self.mu * total.ln();
            let m = self.min_mu_ell();
            let lower = if self.nest_of.is_some() || self.mu >= 1.0 {
                m * ln_n
            } else {
                m * ln_n - (1.0 - self.mu) * (self.nests.len() as f64).ln()
            };
            (lower, upper)
        };
        ModelConstants {
            smooth_l: self.smoothness_constant(),
            diff_c: self.diff_consistency_constant(),
            alpha_exact,
            alpha_lower,
            alpha_upper,
        }
    }

    /// Finite-difference sweep of `d2E/du_i^2 / dE/du_i` over `U ~ U[-50, 0)^n`.
    pub fn check_differential_consistency(
        &self,
        eta: f64,
        samples: usize,
        seed: u64,
    ) -> DiffConsistencyReport {
        const H: f64 = 1e-4;
        assert!(samples >= 1, "at least one sample point is required");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = self.diff_consistency_constant() / eta;
        let mut max_ratio = f64::NEG_INFINITY;
        let mut worst = Vec::new();
        let mut point = vec![0.0; self.n];
        for _ in 0..samples {
            for v in point.iter_mut() {
                *v = rng.random_range(-50.0..0.0);
            }
            let p = self.choice_probabilities(&point, eta);
            for i in 0..self.n {
                let orig = point[i];
                point[i] = orig + H;
                let up = self.choice_probabilities(&point, eta)[i];
                point[i] = orig - H;
                let down = self.choice_probabilities(&point, eta)[i];
                point[i] = orig;
                if p[i] <= 0.0 {
                    continue;
                }
                let ratio = (up - down) / (2.0 * H) / p[i];
                if ratio > max_ratio {
                    max_ratio = ratio;
                    worst = point.clone();
                }
            }
        }
        DiffConsistencyReport {
            max_ratio,
            bound,
            samples,
            worst_point: worst,
            passed: max_ratio <= bound * (1.0 + 1e-3),
        }
    }

    fn log_space(&self, z: &[f64]) -> LogSpace {
        let mut terms = Vec::with_capacity(*self.offsets.last().unwrap_or(&0));
        let mut nest_lse = Vec::with_capacity(self.nests.len());
        let mut nest_scores = Vec::with_capacity(self.nests.len());
        for nest in &self.nests {
            let start = terms.len();
            let inv = 1.0 / nest.mu_ell;
            for (&i, &ls) in nest.members.iter().zip(&nest.log_shares) {
                terms.push((ls + z[i]) * inv);
            }
            let lse = log_sum_exp(&terms[start..]);
            nest_lse.push(lse);
            nest_scores.push(nest.mu_ell * lse / self.mu);
        }
        let top_scaled = log_sum_exp(&nest_scores);
        LogSpace {
            terms,
            nest_lse,
            nest_scores,
            top_scaled,
            top: self.mu * top_scaled,
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: len,
            });
        }
        Ok(())
    }

    fn assert_args(&self, len: usize, eta: f64) {
        assert_eq!(len, self.n, "utility vector has the wrong length");
        assert!(eta > 0.0, "eta must be positive");
    }
}

struct LogSpace {
    /// `(ln sigma + z_i) / mu_ell` for each nest member, flattened.
    terms: Vec<f64>,
    /// `ln sum_i (sigma e^{z_i})^{1/mu_ell}` per nest.
    nest_lse: Vec<f64>,
    /// `v_ell / mu` per nest.
    nest_scores: Vec<f64>,
    top_scaled: f64,
    /// `mu * ln sum_ell exp(v_ell / mu)`, the unsmoothed surplus at `z`.
    top: f64,
}

fn scale(u: &[f64], eta: f64) -> Vec<f64> {
    if eta == 1.0 {
        u.to_vec()
    } else {
        u.iter().map(|v| v / eta).collect()
    }
}

/// Max-shifted `ln sum exp(x)`; `-inf` for an empty slice.
pub fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Choice probabilities with the two-stage factors that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceBreakdown {
    pub probabilities: ProbVector,
    /// Probability of choosing each nest.
    pub nest_probabilities: Vec<f64>,
    conditional: Vec<f64>,
    offsets: Vec<usize>,
}

impl ChoiceBreakdown {
    /// Within-nest probabilities of nest `l`, aligned with its members.
    pub fn conditional(&self, l: usize) -> &[f64] {
        &self.conditional[self.offsets[l]..self.offsets[l + 1]]
    }
}

/// Dense row-major `n x n` matrix of probability derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    n: usize,
    data: Vec<f64>,
}

impl Jacobian {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Constants entering the regret bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelConstants {
    pub smooth_l: f64,
    pub diff_c: f64,
    /// `E(0)`.
    pub alpha_exact: f64,
    pub alpha_lower: f64,
    pub alpha_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffConsistencyReport {
    pub max_ratio: f64,
    pub bound: f64,
    pub samples: usize,
    pub worst_point: Vec<f64>,
    pub passed: bool,
}

/// JSON shape of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Mnl { mnl: MnlSpec },
    Nl { nl: NlSpec },
    General { mu: f64, nests: Vec<NestSpec> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MnlSpec {
    pub n: usize,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NlSpec {
    pub mu_ell: Vec<f64>,
    pub partition: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NestSpec {
    pub id: String,
    pub mu_ell: f64,
    /// Alternative index (as a string key, 0-based) to share.
    pub alloc: BTreeMap<String, f64>,
}

impl TryFrom<ModelSpec> for GnlModel {
    type Error = Error;

    fn try_from(spec: ModelSpec) -> Result<Self> {
        match spec {
            ModelSpec::Mnl { mnl } => GnlModel::mnl(mnl.n, mnl.mu),
            ModelSpec::Nl { nl } => GnlModel::nested_logit(&nl.partition, &nl.mu_ell),
            ModelSpec::General { mu, nests } => {
                let mut n = 0;
                let mut builders = Vec::with_capacity(nests.len());
                for nest in nests {
                    let mut alloc = Vec::with_capacity(nest.alloc.len());
                    for (key, share) in nest.alloc {
                        let i: usize = key.trim().parse().map_err(|_| {
                            Error::InvalidModel(format!("nest '{}': '{key}' is not an arm index", nest.id))
                        })?;
                        n = n.max(i + 1);
                        alloc.push((i, share));
                    }
                    builders.push(NestBuilder::new(nest.id, nest.mu_ell, alloc));
                }
                GnlModel::new(n, mu, builders)
            }
        }
    }
}

impl From<GnlModel> for ModelSpec {
    fn from(model: GnlModel) -> Self {
        ModelSpec::General {
            mu: model.mu,
            nests: model
                .nests
                .into_iter()
                .map(|nest| NestSpec {
                    id: nest.id,
                    mu_ell: nest.mu_ell,
                    alloc: nest
                        .members
                        .iter()
                        .zip(&nest.shares)
                        .map(|(i, s)| (i.to_string(), *s))
                        .collect(),
                })
                .collect(),
        }
    }
}
