//! Relaxed decision variables and the convex objective.

use crate::attacker::MaliciousPmfPair;
use crate::divergence::{kl_term, CompensatedSum};
use crate::error::ModelError;
use crate::tables::{kron_devices, CoefficientTables, Family};

/// The relaxed decision vector: for each family one column per active
/// pattern, each column indexed by outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedVariables {
    num_outcomes: usize,
    blocks: [Vec<f64>; 4],
}

impl RelaxedVariables {
    /// Builds variables from explicit columns, one `Vec` per active pattern.
    pub fn from_columns(
        tables: &CoefficientTables,
        columns: [Vec<Vec<f64>>; 4],
    ) -> Result<Self, ModelError> {
        let n = tables.num_outcomes();
        let mut blocks: [Vec<f64>; 4] = Default::default();
        for family in Family::ALL {
            let cols = &columns[family.slot()];
            let expected = tables.family(family).num_columns();
            if cols.len() != expected {
                return Err(ModelError::TooSmall {
                    what: "number of variable columns",
                    min: expected,
                    got: cols.len(),
                });
            }
            for col in cols {
                if col.len() != n {
                    return Err(ModelError::OutcomeOutOfRange {
                        index: col.len(),
                        count: n,
                    });
                }
                blocks[family.slot()].extend_from_slice(col);
            }
        }
        Ok(Self {
            num_outcomes: n,
            blocks,
        })
    }

    pub fn num_outcomes(&self) -> usize {
        self.num_outcomes
    }

    pub fn column(&self, family: Family, k: usize) -> &[f64] {
        let n = self.num_outcomes;
        &self.blocks[family.slot()][k * n..(k + 1) * n]
    }

    pub fn column_mut(&mut self, family: Family, k: usize) -> &mut [f64] {
        let n = self.num_outcomes;
        &mut self.blocks[family.slot()][k * n..(k + 1) * n]
    }

    /// All entries of one family, columns concatenated.
    pub fn block(&self, family: Family) -> &[f64] {
        &self.blocks[family.slot()]
    }

    pub fn block_mut(&mut self, family: Family) -> &mut [f64] {
        &mut self.blocks[family.slot()]
    }

    pub fn p1(&self) -> &[f64] {
        self.block(Family::P1)
    }

    pub fn p2(&self) -> &[f64] {
        self.block(Family::P2)
    }

    pub fn q1(&self) -> &[f64] {
        self.block(Family::Q1)
    }

    pub fn q2(&self) -> &[f64] {
        self.block(Family::Q2)
    }

    /// Convex combination `mu * self + (1 - mu) * other`.
    pub fn blend(&self, other: &Self, mu: f64) -> Self {
        let mut out = self.clone();
        for (dst, src) in out.blocks.iter_mut().zip(&other.blocks) {
            for (a, &b) in dst.iter_mut().zip(src) {
                *a = mu * *a + (1.0 - mu) * b;
            }
        }
        out
    }

    /// Largest distance of any entry from the box `[0, 1]`.
    pub fn box_violation(&self) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .map(|&x| (-x).max(x - 1.0).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Largest relative violation of the weighted budgets.
    pub fn budget_violation(&self, tables: &CoefficientTables) -> f64 {
        let mut worst: f64 = 0.0;
        for table in tables.families() {
            for (k, &budget) in table.budgets().iter().enumerate() {
                let got = weighted_sum(table.column(k), self.column(table.family(), k));
                worst = worst.max((got - budget).abs() / budget);
            }
        }
        worst
    }
}

pub(crate) fn weighted_sum(w: &[f64], x: &[f64]) -> f64 {
    let mut acc = CompensatedSum::default();
    for (&a, &b) in w.iter().zip(x) {
        acc.add(a * b);
    }
    acc.value()
}

/// Evaluates the relaxed variables at an attacker PMF pair: each entry is
/// the product of the attacker's PMF entries over the falsified slots of
/// the malicious devices.
pub fn lift_pmf_to_theta(
    tables: &CoefficientTables,
    dist: &MaliciousPmfPair,
) -> Result<RelaxedVariables, ModelError> {
    dist.check_alphabet(tables.config().alphabet_size)?;
    let n_dev = tables.config().num_devices;
    let seqs = tables.sequences();
    let ones = vec![1.0; tables.space().sequences_per_device];
    let mut blocks: [Vec<f64>; 4] = Default::default();
    for family in Family::ALL {
        let pmf = if family.is_h1() { &dist.pb } else { &dist.qb };
        let products = seqs.attacker_products(family.is_success_branch(), pmf);
        let block = &mut blocks[family.slot()];
        for pattern in tables.family(family).patterns() {
            block.extend(kron_devices(n_dev, |j| {
                if pattern.is_malicious(j) {
                    &products
                } else {
                    &ones
                }
            }));
        }
    }
    Ok(RelaxedVariables {
        num_outcomes: tables.num_outcomes(),
        blocks,
    })
}

fn accumulate(base: &[f64], tables: &CoefficientTables, vars: &RelaxedVariables, fams: [Family; 2]) -> Vec<f64> {
    let mut out = base.to_vec();
    for family in fams {
        let table = tables.family(family);
        for k in 0..table.num_columns() {
            for ((o, &w), &x) in out.iter_mut().zip(table.column(k)).zip(vars.column(family, k)) {
                *o += w * x;
            }
        }
    }
    out
}

/// `A_i = Theta_i + sum Delta Q1 + sum Phi Q2`, the H0 mass of outcome `i`.
pub fn h0_masses(tables: &CoefficientTables, vars: &RelaxedVariables) -> Vec<f64> {
    accumulate(tables.theta(), tables, vars, [Family::Q1, Family::Q2])
}

/// `B_i = Psi_i + sum Gamma P1 + sum Lambda P2`, the H1 mass of outcome `i`.
pub fn h1_masses(tables: &CoefficientTables, vars: &RelaxedVariables) -> Vec<f64> {
    accumulate(tables.psi(), tables, vars, [Family::P1, Family::P2])
}

/// `(p, q) = (B, A)`: the joint PMFs implied by the relaxed variables.
pub fn joint_pmf(tables: &CoefficientTables, vars: &RelaxedVariables) -> (Vec<f64>, Vec<f64>) {
    (h1_masses(tables, vars), h0_masses(tables, vars))
}

/// `sum_i A_i ln(A_i / B_i)` with `0 ln(0/x) = 0` and `+inf` when `A_i > 0 = B_i`.
pub fn relaxed_objective(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = CompensatedSum::default();
    for (&x, &y) in a.iter().zip(b) {
        let t = kl_term(x, y);
        if t.is_infinite() {
            return f64::INFINITY;
        }
        acc.add(t);
    }
    acc.value()
}

/// The relaxed objective `D1(theta)`.
pub fn kld_relaxed(tables: &CoefficientTables, vars: &RelaxedVariables) -> f64 {
    let (b, a) = joint_pmf(tables, vars);
    relaxed_objective(&a, &b)
}
