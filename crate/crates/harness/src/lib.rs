//! Experiment harness for GNL bandit and online-learning algorithms.
//!
//! A JSON [`config::ExperimentConfig`] names an environment and a list of
//! learner variants; [`run::run_experiment`] runs seeded replications in
//! parallel and [`output::emit_all`] writes CSV tables, SVG charts and a
//! metadata file.

pub mod bounds;
pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod run;
pub mod seed;
pub mod verify;

pub use config::{ExperimentConfig, Format, Overrides};
pub use error::{HarnessError, Result};
pub use run::{run_experiment, AggregateResult};
