//! Experiment specification files.

use std::path::{Path, PathBuf};

use biot_guarantee::pgd::PgdSettings;
use biot_guarantee::solver::SolverSettings;
use biot_guarantee::{SystemConfig, TableLimits};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Guarantee,
    Pgd,
    #[serde(alias = "mc")]
    Montecarlo,
}

impl std::str::FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "guarantee" => Ok(Engine::Guarantee),
            "pgd" => Ok(Engine::Pgd),
            "mc" | "montecarlo" => Ok(Engine::Montecarlo),
            other => Err(format!("unknown engine `{other}` (expected guarantee, pgd or mc)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    JsonLines,
}

/// Grid values; every empty axis keeps the base system's value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dsa_success_prob: Vec<f64>,
    /// `(L_0, L_A)` pairs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocks: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub epsilon: f64,
    pub max_outer_iters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_tol: Option<f64>,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = SolverSettings::default();
        Self {
            epsilon: d.epsilon,
            max_outer_iters: d.max_outer_iters,
            step_tol: d.step_tol,
        }
    }
}

impl SolverSpec {
    pub fn settings(&self) -> SolverSettings {
        SolverSettings {
            epsilon: self.epsilon,
            max_outer_iters: self.max_outer_iters,
            step_tol: self.step_tol,
            ..SolverSettings::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PgdSpec {
    pub num_starts: usize,
    pub max_iters: usize,
    pub initial_step: f64,
    pub backtrack: f64,
    pub armijo: f64,
    pub tolerance: f64,
}

impl Default for PgdSpec {
    fn default() -> Self {
        let d = PgdSettings::default();
        Self {
            num_starts: d.num_starts,
            max_iters: d.max_iters,
            initial_step: d.initial_step,
            backtrack: d.backtrack,
            armijo: d.armijo,
            tolerance: d.tolerance,
        }
    }
}

impl PgdSpec {
    pub fn settings(&self, seed: u64) -> PgdSettings {
        PgdSettings {
            num_starts: self.num_starts,
            max_iters: self.max_iters,
            initial_step: self.initial_step,
            backtrack: self.backtrack,
            armijo: self.armijo,
            tolerance: self.tolerance,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSpec {
    pub trials: u64,
}

impl Default for MonteCarloSpec {
    fn default() -> Self {
        Self { trials: 100_000 }
    }
}

/// A complete experiment: base system, grid, engines and output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub engines: Vec<Engine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub continue_on_error: bool,
    /// Largest accepted outcome-space size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_outcomes: Option<u64>,
    pub system: SystemConfig,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub pgd: PgdSpec,
    #[serde(default)]
    pub montecarlo: MonteCarloSpec,
}

/// One grid point, identified by its swept parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub config: SystemConfig,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        Ok(toml::to_string(self)?)
    }

    pub fn limits(&self) -> TableLimits {
        let mut limits = TableLimits::default();
        if let Some(cap) = self.max_outcomes {
            limits.max_outcomes = cap as u128;
        }
        limits
    }

    /// The Cartesian product of all sweep axes, sorted by
    /// `(alpha, P_s, L_0, L_A)`. Points are not validated here.
    pub fn grid(&self) -> Vec<GridPoint> {
        let base = &self.system;
        let or_base = |v: &[f64], b: f64| if v.is_empty() { vec![b] } else { v.to_vec() };
        let alphas = or_base(&self.sweep.alpha, base.compromise_prob);
        let dsas = or_base(&self.sweep.dsa_success_prob, base.dsa_success_prob);
        let blocks = if self.sweep.blocks.is_empty() {
            vec![(base.honest_prefix, base.attack_start)]
        } else {
            self.sweep.blocks.clone()
        };
        let mut configs = Vec::new();
        for &alpha in &alphas {
            for &ps in &dsas {
                for &(l0, la) in &blocks {
                    configs.push(SystemConfig {
                        compromise_prob: alpha,
                        dsa_success_prob: ps,
                        honest_prefix: l0,
                        attack_start: la,
                        ..base.clone()
                    });
                }
            }
        }
        configs.sort_by(|a, b| {
            a.compromise_prob
                .total_cmp(&b.compromise_prob)
                .then(a.dsa_success_prob.total_cmp(&b.dsa_success_prob))
                .then(a.honest_prefix.cmp(&b.honest_prefix))
                .then(a.attack_start.cmp(&b.attack_start))
        });
        configs
            .into_iter()
            .enumerate()
            .map(|(index, config)| GridPoint { index, config })
            .collect()
    }
}
