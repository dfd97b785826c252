//! Experiment runner: reads a TOML experiment spec, sweeps the scenario
//! grid through the guarantee solver, the projected-gradient baseline and
//! the Monte Carlo estimator, and emits one row per grid point.

pub mod emit;
pub mod error;
pub mod run;
pub mod spec;

pub use emit::{emit_results, read_results, write_results};
pub use error::{CliError, PointError};
pub use run::{run_experiment, ResultRow, ResultTable, RunOptions, RunReport};
pub use spec::{Engine, ExperimentSpec, Format};
