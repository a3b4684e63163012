//! Experiment harness: runs catalog designs end to end (simulate, fit,
//! sample, score) and writes metrics and plot-ready curves.

pub mod config;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod output;

pub use config::{Estimand, ExperimentConfig};
pub use error::{BenchError, Result};
pub use experiment::{compute, run_experiment, MetricReport, ReplicationOutput};
pub use metrics::{mape, metrics, CurvePoint, Mape, Metrics};
