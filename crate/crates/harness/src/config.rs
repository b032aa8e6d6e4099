//! Experiment configuration and its validation.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use choicebandit_core::adv_bandit::optimal_bandit_eta;
use choicebandit_core::envs::{AdversarialKind, EnvFamily, LossMatrix};
use choicebandit_core::experts::experts_regret_bound;
use choicebandit_core::grad_bandit::{GradBanditKind, GradBanditVariant};
use choicebandit_core::GnlModel;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Step size used by gradient bandits when a variant does not set one.
pub const DEFAULT_ALPHA: f64 = 0.1;
/// Replication count under `--fast`.
pub const FAST_REPLICATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub env: EnvSpec,
    pub variants: Vec<VariantSpec>,
    pub steps: usize,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Svg]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Svg,
}

/// Where rewards come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvSpec {
    /// `{"family": "mnl-env"}` and friends.
    Stochastic(EnvFamily),
    /// A fresh oblivious loss matrix per replication.
    Adversarial { adversarial: AdversarialKind, n: usize },
    /// One fixed loss matrix read from a headerless CSV file.
    LossCsv { loss_csv: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub name: String,
    #[serde(flatten)]
    pub algorithm: Algorithm,
    pub model: GnlModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case")]
pub enum Algorithm {
    ClassicalSoftmax {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
    },
    GeneralizedGnl {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
    },
    NestedLogitClosedForm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
    },
    /// Full-feedback learner; `eta` defaults to the bound minimiser.
    Experts {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta: Option<f64>,
    },
    /// Importance-weighted bandit; `eta` defaults to the bound minimiser.
    AdvBandit {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta: Option<f64>,
    },
}

impl Algorithm {
    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::ClassicalSoftmax { .. } => "classical-softmax",
            Algorithm::GeneralizedGnl { .. } => "generalized-gnl",
            Algorithm::NestedLogitClosedForm { .. } => "nested-logit-closed-form",
            Algorithm::Experts { .. } => "experts",
            Algorithm::AdvBandit { .. } => "adv-bandit",
        }
    }
}

/// Command-line adjustments applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub fast: bool,
    pub out: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
}

impl ExperimentConfig {
    /// Reads a JSON config; a relative `loss_csv` path is taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let EnvSpec::LossCsv { loss_csv } = &mut cfg.env {
            if loss_csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *loss_csv = dir.join(&*loss_csv);
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if o.fast {
            self.replications = self.replications.min(FAST_REPLICATIONS);
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(f) = &o.formats {
            self.formats = f.clone();
        }
    }

    /// Checks every invariant and resolves defaults, before anything runs.
    pub fn prepare(&self) -> Result<Prepared> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.variants.is_empty() {
            return bad("no variants".into());
        }
        let mut names = HashSet::new();
        for v in &self.variants {
            if !names.insert(v.name.as_str()) {
                return bad(format!("duplicate variant name '{}'", v.name));
            }
        }
        let env = match &self.env {
            EnvSpec::Stochastic(f) => PreparedEnv::Stochastic(f.clone()),
            EnvSpec::Adversarial { adversarial, n } => {
                if *n == 0 {
                    return bad("adversarial environment needs n >= 1".into());
                }
                PreparedEnv::Adversarial { kind: *adversarial, n: *n }
            }
            EnvSpec::LossCsv { loss_csv } => {
                let file = fs::File::open(loss_csv)
                    .map_err(|e| HarnessError::Config(format!("cannot open {}: {e}", loss_csv.display())))?;
                let m = LossMatrix::from_csv(file).map_err(|e| HarnessError::Config(e.to_string()))?;
                if m.steps() < self.steps {
                    return bad(format!("loss file has {} rows, {} steps requested", m.steps(), self.steps));
                }
                PreparedEnv::Fixed(m)
            }
        };
        let n = env.n();
        let adversarial = !matches!(env, PreparedEnv::Stochastic(_));
        let mut agents = Vec::with_capacity(self.variants.len());
        for v in &self.variants {
            if v.model.n() != n {
                return bad(format!(
                    "variant '{}' has {} alternatives, environment has {n}",
                    v.name,
                    v.model.n()
                ));
            }
            let agent = match v.algorithm {
                Algorithm::ClassicalSoftmax { alpha }
                | Algorithm::GeneralizedGnl { alpha }
                | Algorithm::NestedLogitClosedForm { alpha } => {
                    if adversarial {
                        return bad(format!("variant '{}': gradient bandits need a stochastic environment", v.name));
                    }
                    let kind = match v.algorithm {
                        Algorithm::ClassicalSoftmax { .. } => GradBanditKind::ClassicalSoftmax,
                        Algorithm::GeneralizedGnl { .. } => GradBanditKind::GeneralizedGnl,
                        _ => GradBanditKind::NestedLogitClosedForm,
                    };
                    let gv = GradBanditVariant::new(kind, v.model.clone(), alpha.unwrap_or(DEFAULT_ALPHA))
                        .map_err(|e| HarnessError::Config(format!("variant '{}': {e}", v.name)))?;
                    Agent::Gradient(gv)
                }
                Algorithm::Experts { eta } | Algorithm::AdvBandit { eta } => {
                    if !adversarial {
                        return bad(format!("variant '{}': needs an adversarial environment", v.name));
                    }
                    let experts = matches!(v.algorithm, Algorithm::Experts { .. });
                    let eta = match eta {
                        Some(e) => e,
                        None if experts => experts_regret_bound(&v.model, 1.0, 1.0, self.steps).optimal_eta,
                        None => optimal_bandit_eta(&v.model, n, self.steps),
                    };
                    // a single alternative has E(0) = 0 and no finite minimiser
                    let eta = if n == 1 && eta == f64::INFINITY { 1.0 } else { eta };
                    if !(eta.is_finite() && eta > 0.0) {
                        return bad(format!("variant '{}': eta must be positive and finite, got {eta}", v.name));
                    }
                    if experts {
                        Agent::Experts { model: v.model.clone(), eta }
                    } else {
                        Agent::Bandit { model: v.model.clone(), eta }
                    }
                }
            };
            agents.push(agent);
        }
        Ok(Prepared { env, agents })
    }
}

/// A validated config: resolved environment and learners in variant order.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub env: PreparedEnv,
    pub agents: Vec<Agent>,
}

#[derive(Debug, Clone)]
pub enum PreparedEnv {
    Stochastic(EnvFamily),
    Adversarial { kind: AdversarialKind, n: usize },
    Fixed(LossMatrix),
}

impl PreparedEnv {
    pub fn n(&self) -> usize {
        match self {
            PreparedEnv::Stochastic(f) => f.n(),
            PreparedEnv::Adversarial { n, .. } => *n,
            PreparedEnv::Fixed(m) => m.n(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Agent {
    Gradient(GradBanditVariant),
    Experts { model: GnlModel, eta: f64 },
    Bandit { model: GnlModel, eta: f64 },
}

impl Agent {
    /// `("alpha", value)` or `("eta", value)`.
    pub fn rate(&self) -> (&'static str, f64) {
        match self {
            Agent::Gradient(v) => ("alpha", v.alpha()),
            Agent::Experts { eta, .. } | Agent::Bandit { eta, .. } => ("eta", *eta),
        }
    }
}
