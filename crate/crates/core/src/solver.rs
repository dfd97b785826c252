//! Block coordinate descent for the relaxed problem.
//!
//! One outer sweep visits the patterns `m = 1, ..., 2^N - 1` in order and,
//! for each, minimizes the objective exactly over the `P1`, `P2`, `Q1` and
//! `Q2` columns of `m` in turn, each by one capped water-filling:
//!
//! * H1 columns (`P1`, `P2`): slope `A_i`, floor `B_i` without this column,
//!   weight the column's coefficient. Minimizing `-sum_i A_i ln B_i` under
//!   the budget gives `B_i = zeta A_i` wherever the box is not binding.
//! * H0 columns (`Q1`, `Q2`): slope `B_i`, floor `A_i` without this column.
//!   Stationarity of `sum_i A_i ln(A_i / B_i)` gives `A_i = zeta B_i`.
//!
//! The objective is recomputed once per sweep and the loop stops when two
//! consecutive values differ by less than `epsilon`.

use thiserror::Error;

use crate::attacker::MaliciousPmfPair;
use crate::divergence::CompensatedSum;
use crate::error::ModelError;
use crate::relaxed::{h0_masses, h1_masses, lift_pmf_to_theta, relaxed_objective, RelaxedVariables};
use crate::tables::{CoefficientTables, Family};
use crate::waterfill::{waterfill_into, Scratch, WaterfillError};

/// Largest per-sweep objective increase still counted as descent.
pub const DESCENT_SLACK: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("water-filling failed on the {family:?} column of pattern {pattern}: {source}")]
    Waterfill {
        family: Family,
        pattern: u64,
        source: WaterfillError,
    },
    #[error("pattern {pattern} is not active for family {family:?}")]
    InactivePattern { family: Family, pattern: u64 },
    #[error("invalid solver settings: {0}")]
    Settings(&'static str),
    #[error("initial point is infeasible (box violation {box_violation:e}, budget violation {budget_violation:e})")]
    InfeasibleStart {
        box_violation: f64,
        budget_violation: f64,
    },
}

/// Starting point of the descent.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Lift of the uniform attacker PMFs.
    Uniform,
    /// Lift of the given attacker PMFs.
    Lifted(MaliciousPmfPair),
    Explicit(RelaxedVariables),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    /// Stop once `|D_t - D_{t-1}| < epsilon` (nats).
    pub epsilon: f64,
    pub max_outer_iters: usize,
    pub init: Init,
    /// When set, additionally require the largest column change of the
    /// last sweep to fall below this value before stopping.
    pub step_tol: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            epsilon: 1e-9,
            max_outer_iters: 10_000,
            init: Init::Uniform,
            step_tol: None,
        }
    }
}

impl SolverSettings {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<(), SolverError> {
        if !(self.epsilon > 0.0) {
            return Err(SolverError::Settings("epsilon must be positive"));
        }
        if matches!(self.step_tol, Some(t) if !(t > 0.0)) {
            return Err(SolverError::Settings("step_tol must be positive"));
        }
        if self.max_outer_iters == 0 {
            return Err(SolverError::Settings("max_outer_iters must be at least 1"));
        }
        Ok(())
    }
}

/// Outcome of [`solve_relaxed`].
#[derive(Debug, Clone, PartialEq)]
pub struct GuaranteeResult {
    /// Optimal relaxed KL divergence (nats); the detection guarantee.
    pub value: f64,
    pub theta_star: RelaxedVariables,
    /// Objective before the first sweep and after every sweep.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Mutable descent state: the variables plus the running H0/H1 masses.
#[derive(Debug)]
pub struct DescentState<'t> {
    tables: &'t CoefficientTables,
    vars: RelaxedVariables,
    /// `A_i`.
    h0: Vec<f64>,
    /// `B_i`.
    h1: Vec<f64>,
    floors: Vec<f64>,
    next: Vec<f64>,
    scratch: Scratch,
}

impl<'t> DescentState<'t> {
    pub fn new(tables: &'t CoefficientTables, vars: RelaxedVariables) -> Self {
        let n = tables.num_outcomes();
        let mut state = Self {
            tables,
            vars,
            h0: Vec::new(),
            h1: Vec::new(),
            floors: vec![0.0; n],
            next: vec![0.0; n],
            scratch: Scratch::default(),
        };
        state.refresh();
        state
    }

    /// Recomputes `A` and `B` from scratch, discarding incremental drift.
    pub fn refresh(&mut self) {
        self.h0 = h0_masses(self.tables, &self.vars);
        self.h1 = h1_masses(self.tables, &self.vars);
    }

    pub fn variables(&self) -> &RelaxedVariables {
        &self.vars
    }

    pub fn into_variables(self) -> RelaxedVariables {
        self.vars
    }

    pub fn h0_masses(&self) -> &[f64] {
        &self.h0
    }

    pub fn h1_masses(&self) -> &[f64] {
        &self.h1
    }

    pub fn objective(&self) -> f64 {
        relaxed_objective(&self.h0, &self.h1)
    }

    /// Exact minimizer of the objective over column `k` of `family`, all
    /// other columns fixed. Leaves the result in `self.next` and the
    /// column-free masses in `self.floors`.
    fn solve_block(&mut self, family: Family, k: usize) -> Result<(), SolverError> {
        let table = self.tables.family(family);
        let weights = table.column(k);
        let budget = table.budgets()[k];
        let current = self.vars.column(family, k);
        let (own, other) = if family.is_h1() {
            (&self.h1, &self.h0)
        } else {
            (&self.h0, &self.h1)
        };
        for (((f, &m), &w), &x) in self.floors.iter_mut().zip(own).zip(weights).zip(current) {
            *f = (m - w * x).max(0.0);
        }
        match waterfill_into(weights, other, &self.floors, budget, &mut self.next, &mut self.scratch) {
            Ok(_) => Ok(()),
            Err(WaterfillError::InsufficientCapacity { .. }) if family.is_h1() => {
                spill_to_idle(weights, other, budget, &mut self.next);
                Ok(())
            }
            Err(source) => Err(SolverError::Waterfill {
                family,
                pattern: table.patterns()[k].index(),
                source,
            }),
        }
    }

    /// Replaces column `k` of `family` by its block minimizer and returns
    /// the max-norm change of the column.
    pub fn update_block(&mut self, family: Family, k: usize) -> Result<f64, SolverError> {
        self.solve_block(family, k)?;
        let weights = self.tables.family(family).column(k);
        let own = if family.is_h1() {
            &mut self.h1
        } else {
            &mut self.h0
        };
        let column = self.vars.column_mut(family, k);
        let mut moved: f64 = 0.0;
        for i in 0..column.len() {
            let x = self.next[i];
            moved = moved.max((x - column[i]).abs());
            column[i] = x;
            own[i] = self.floors[i] + weights[i] * x;
        }
        Ok(moved)
    }

    /// Max-norm change the block update of column `k` would make, without
    /// applying it.
    pub fn block_step(&mut self, family: Family, k: usize) -> Result<f64, SolverError> {
        self.solve_block(family, k)?;
        let column = self.vars.column(family, k);
        Ok(column
            .iter()
            .zip(&self.next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// One outer sweep in pattern order, `P1, P2, Q1, Q2` within a pattern.
    /// Returns the largest column change.
    pub fn sweep(&mut self) -> Result<f64, SolverError> {
        let mut moved: f64 = 0.0;
        for pattern in crate::pattern::DevicePattern::all(self.tables.config().num_devices) {
            for family in Family::ALL {
                if let Some(k) = self.tables.family(family).position(pattern.index()) {
                    moved = moved.max(self.update_block(family, k)?);
                }
            }
        }
        self.refresh();
        Ok(moved)
    }
}

/// Budget overflow on an H1 column: every outcome with `A_i > 0` is already
/// saturated, and outcomes with `A_i = 0` do not affect the objective, so
/// the rest of the budget is spread evenly over them.
fn spill_to_idle(weights: &[f64], slopes: &[f64], budget: f64, out: &mut [f64]) {
    let mut busy = CompensatedSum::default();
    let mut idle = CompensatedSum::default();
    for (&w, &a) in weights.iter().zip(slopes) {
        if a > 0.0 {
            busy.add(w);
        } else {
            idle.add(w);
        }
    }
    let fraction = ((budget - busy.value()) / idle.value()).clamp(0.0, 1.0);
    for (x, &a) in out.iter_mut().zip(slopes) {
        *x = if a > 0.0 { 1.0 } else { fraction };
    }
}

fn initial_variables(
    tables: &CoefficientTables,
    init: &Init,
) -> Result<RelaxedVariables, SolverError> {
    let vars = match init {
        Init::Uniform => {
            lift_pmf_to_theta(tables, &MaliciousPmfPair::uniform(tables.config().alphabet_size))?
        }
        Init::Lifted(dist) => lift_pmf_to_theta(tables, dist)?,
        Init::Explicit(vars) => vars.clone(),
    };
    let box_violation = vars.box_violation();
    let budget_violation = vars.budget_violation(tables);
    if vars.num_outcomes() != tables.num_outcomes() || box_violation > 1e-12 || budget_violation > 1e-9
    {
        return Err(SolverError::InfeasibleStart {
            box_violation,
            budget_violation,
        });
    }
    Ok(vars)
}

/// Runs the coordinate descent to convergence.
///
/// Failing to converge within `max_outer_iters` is not an error: the last
/// iterate is returned with `converged = false`.
pub fn solve_relaxed(
    tables: &CoefficientTables,
    settings: &SolverSettings,
) -> Result<GuaranteeResult, SolverError> {
    settings.check()?;
    let vars = initial_variables(tables, &settings.init)?;
    let mut state = DescentState::new(tables, vars);
    let mut trace = vec![state.objective()];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < settings.max_outer_iters {
        let moved = state.sweep()?;
        iterations += 1;
        let value = state.objective();
        let previous = *trace.last().expect("trace starts non-empty");
        trace.push(value);
        let settled = settings.step_tol.is_none_or(|tol| moved < tol);
        if (value - previous).abs() < settings.epsilon && settled {
            converged = true;
            break;
        }
    }
    Ok(GuaranteeResult {
        value: *trace.last().expect("trace starts non-empty"),
        theta_star: state.into_variables(),
        trace,
        iterations,
        converged,
    })
}

/// The block minimizer of one column of `theta` for pattern `m`, all other
/// columns held fixed.
pub fn update_block(
    tables: &CoefficientTables,
    theta: &RelaxedVariables,
    family: Family,
    m: u64,
) -> Result<Vec<f64>, SolverError> {
    let k = tables
        .family(family)
        .position(m)
        .ok_or(SolverError::InactivePattern { family, pattern: m })?;
    let mut state = DescentState::new(tables, theta.clone());
    state.update_block(family, k)?;
    Ok(state.variables().column(family, k).to_vec())
}

/// Updates the `P1` column of pattern `m` (coefficients Gamma, slope `A_i`).
pub fn update_block_p1(
    tables: &CoefficientTables,
    theta: &RelaxedVariables,
    m: u64,
) -> Result<Vec<f64>, SolverError> {
    update_block(tables, theta, Family::P1, m)
}

/// Updates the `P2` column of pattern `m` (coefficients Lambda, slope `A_i`).
pub fn update_block_p2(
    tables: &CoefficientTables,
    theta: &RelaxedVariables,
    m: u64,
) -> Result<Vec<f64>, SolverError> {
    update_block(tables, theta, Family::P2, m)
}

/// Updates the `Q1` column of pattern `m` (coefficients Delta, slope `B_i`).
pub fn update_block_q1(
    tables: &CoefficientTables,
    theta: &RelaxedVariables,
    m: u64,
) -> Result<Vec<f64>, SolverError> {
    update_block(tables, theta, Family::Q1, m)
}

/// Updates the `Q2` column of pattern `m` (coefficients Phi, slope `B_i`).
pub fn update_block_q2(
    tables: &CoefficientTables,
    theta: &RelaxedVariables,
    m: u64,
) -> Result<Vec<f64>, SolverError> {
    update_block(tables, theta, Family::Q2, m)
}

/// Largest max-norm change any single block update would make at `theta`.
/// Zero exactly at a fixed point of every block map.
pub fn block_residual(
    tables: &CoefficientTables,
    theta: &RelaxedVariables,
) -> Result<f64, SolverError> {
    let mut state = DescentState::new(tables, theta.clone());
    let mut worst: f64 = 0.0;
    for family in Family::ALL {
        for k in 0..tables.family(family).num_columns() {
            worst = worst.max(state.block_step(family, k)?);
        }
    }
    Ok(worst)
}
