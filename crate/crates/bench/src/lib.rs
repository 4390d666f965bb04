//! Experiment harness for the splr solvers: metrics, experiment configs, result tables and a
//! parallel runner. The `splr` binary wraps this crate.

pub mod config;
pub mod error;
pub mod metrics;
pub mod results;
pub mod runner;

pub use config::{ExperimentConfig, SolverConfigs, SolverKind};
pub use error::{BenchError, Result};
pub use metrics::{align_phase, metric_mre, metric_phase, PhaseMetrics};
pub use results::{read_csv, rows_to_csv, write_csv, write_json, ResultRow};
pub use runner::{run_experiment, solve_generated, thread_count, THREADS_ENV};
