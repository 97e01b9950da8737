//! Experiment harness: generators, configuration, runner, rate fits and output.

pub mod config;
pub mod generators;
pub mod output;
pub mod quadrature;
pub mod rate;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentId, Method, WeightSpec};
pub use rate::{fit_rate, GroupCol, RateFit};
pub use runner::{run_experiment, ResultRow, RunOutput};
