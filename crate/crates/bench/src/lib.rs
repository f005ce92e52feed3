//! Experiment harness: baselines, metrics, CSV output and plots.

// `!(x > 0.0)` checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod config;
pub mod experiment;
pub mod metrics;
pub mod pipeline;
pub mod plot;

pub use experiment::{run_cell, run_experiment, ExperimentConfig, NoisePreset};
pub use metrics::{DivergenceSpec, JumpSpec, MetricsReport, RunRecord};
pub use pipeline::{make_localizer, Method, MethodConfigs};
