//! Experiment runner for `sdentropy`: JSON configs, SNR sweeps over a
//! registry of estimation methods, and CSV output.

pub mod config;
pub mod error;
pub mod methods;
pub mod output;
pub mod runner;

pub use config::ExperimentConfig;
pub use error::HarnessError;
pub use methods::{Context, Method, Registry};
pub use output::{BoundKind, CsvSink, ResultRow};
pub use runner::{run_experiment, sweep_convergence, RunOptions, SweepParam};
