use std::path::PathBuf;

use biot_guarantee::pgd::PgdError;
use biot_guarantee::sim::SimError;
use biot_guarantee::solver::SolverError;
use biot_guarantee::ModelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid experiment spec: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize experiment spec: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("no engines selected")]
    NoEngines,
    #[error("grid point {index}: {source}")]
    Point { index: usize, source: PointError },
    #[error("{failed} of {total} grid points failed")]
    PartialFailure { failed: usize, total: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Why one grid point could not be evaluated.
#[derive(Debug, Error)]
pub enum PointError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Pgd(#[from] PgdError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
