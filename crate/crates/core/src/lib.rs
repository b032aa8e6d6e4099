//! Discrete-choice surplus functions and the learning algorithms built on them.
//!
//! [`gev`] evaluates generalized nested logit (GNL) models: surplus, choice
//! probabilities, their Jacobian and the constants entering regret bounds.
//! The learners use those probabilities as decisions:
//!
//! * [`experts`]: full-feedback online learning,
//! * [`adv_bandit`]: adversarial bandits with importance-weighted estimates,
//! * [`grad_bandit`]: gradient bandits for stochastic rewards.
//!
//! [`envs`] provides the reward-generating environments.

pub mod adv_bandit;
pub mod envs;
pub mod error;
pub mod experts;
pub mod gev;
pub mod grad_bandit;
pub mod simplex;

pub use error::{Error, Result};
pub use gev::{GnlModel, ModelConstants, ModelKind, NestBuilder};
pub use simplex::ProbVector;
