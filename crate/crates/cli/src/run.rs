//! Grid evaluation.

use std::time::Instant;

use biot_guarantee::pgd::pgd_multistart;
use biot_guarantee::sim::empirical_kld;
use biot_guarantee::solver::solve_relaxed;
use biot_guarantee::{validate_config, CoefficientTables, MaliciousPmfPair};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, PointError};
use crate::spec::{Engine, ExperimentSpec, GridPoint};

pub const UNIT: &str = "nats";

/// One grid point's results. Columns of engines that did not run are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub alpha: f64,
    pub dsa_success_prob: f64,
    pub honest_prefix: usize,
    pub attack_start: usize,
    pub unit: String,
    pub guarantee: Option<f64>,
    pub cd_iterations: Option<usize>,
    pub cd_converged: Option<bool>,
    pub pgd_min: Option<f64>,
    /// `pgd_min - guarantee`; nonnegative up to solver tolerances.
    pub gap: Option<f64>,
    pub mc_kld: Option<f64>,
    pub mc_std_error: Option<f64>,
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Every float rounded to `digits` significant digits.
    pub fn rounded(&self, digits: usize) -> Self {
        let r = |x: f64| round_significant(x, digits);
        let ro = |x: Option<f64>| x.map(r);
        Self {
            rows: self
                .rows
                .iter()
                .map(|row| ResultRow {
                    alpha: r(row.alpha),
                    dsa_success_prob: r(row.dsa_success_prob),
                    guarantee: ro(row.guarantee),
                    pgd_min: ro(row.pgd_min),
                    gap: ro(row.gap),
                    mc_kld: ro(row.mc_kld),
                    mc_std_error: ro(row.mc_std_error),
                    wall_time_s: ro(row.wall_time_s),
                    ..row.clone()
                })
                .collect(),
        }
    }
}

pub fn round_significant(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .expect("formatted float parses")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Fill the wall-time column. Off by default so output is reproducible.
    pub timings: bool,
}

#[derive(Debug)]
pub struct RunReport {
    pub table: ResultTable,
    /// Grid points skipped under `continue_on_error`.
    pub failures: Vec<(usize, PointError)>,
}

pub fn evaluate_point(
    spec: &ExperimentSpec,
    point: &GridPoint,
    options: RunOptions,
) -> Result<ResultRow, PointError> {
    let start = Instant::now();
    let cfg = validate_config(point.config.clone())?;
    let tables = CoefficientTables::build_with_limits(&cfg, spec.limits())?;
    let runs = |e: Engine| spec.engines.contains(&e);
    let mut row = ResultRow {
        alpha: cfg.compromise_prob,
        dsa_success_prob: cfg.dsa_success_prob,
        honest_prefix: cfg.honest_prefix,
        attack_start: cfg.attack_start,
        unit: UNIT.to_string(),
        guarantee: None,
        cd_iterations: None,
        cd_converged: None,
        pgd_min: None,
        gap: None,
        mc_kld: None,
        mc_std_error: None,
        wall_time_s: None,
    };
    if runs(Engine::Guarantee) {
        let r = solve_relaxed(&tables, &spec.solver.settings())?;
        row.guarantee = Some(r.value);
        row.cd_iterations = Some(r.iterations);
        row.cd_converged = Some(r.converged);
    }
    let mut attacker = MaliciousPmfPair::uniform(cfg.alphabet_size);
    if runs(Engine::Pgd) {
        let r = pgd_multistart(&tables, &spec.pgd.settings(spec.seed))?;
        row.pgd_min = Some(r.value);
        attacker = r.argmin;
    }
    if let (Some(g), Some(p)) = (row.guarantee, row.pgd_min) {
        row.gap = Some(p - g);
    }
    if runs(Engine::Montecarlo) {
        let est = empirical_kld(&tables, &attacker, spec.montecarlo.trials, spec.seed)?;
        row.mc_kld = Some(est.estimate);
        row.mc_std_error = Some(est.std_error);
    }
    if options.timings {
        row.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    Ok(row)
}

/// Evaluates every grid point in order. Without `continue_on_error` the
/// first failing point aborts the run.
pub fn run_experiment(spec: &ExperimentSpec, options: RunOptions) -> Result<RunReport, CliError> {
    if spec.engines.is_empty() {
        return Err(CliError::NoEngines);
    }
    let mut table = ResultTable::default();
    let mut failures = Vec::new();
    for point in spec.grid() {
        match evaluate_point(spec, &point, options) {
            Ok(row) => table.rows.push(row),
            Err(source) if !spec.continue_on_error => {
                return Err(CliError::Point {
                    index: point.index,
                    source,
                })
            }
            Err(source) => failures.push((point.index, source)),
        }
    }
    Ok(RunReport { table, failures })
}
