//! Worst-case detection guarantees for distributed detection over a
//! blockchain-aided IoT network whose devices and ledger are both under
//! attack.
//!
//! The attacker picks malicious-data PMFs to minimize the KL divergence
//! between the joint distributions of the stored data under the two
//! hypotheses. That problem is nonconvex; replacing every product of
//! attacker PMF entries by a free variable in `[0, 1]`, subject to the
//! budget equalities the products satisfy, gives a convex problem whose
//! optimum lower-bounds the true minimum. [`solver::solve_relaxed`]
//! computes it by block coordinate descent with a closed-form capped
//! water-filling update per block; [`pgd::pgd_multistart`] attacks the
//! original problem directly for comparison, and [`sim`] samples the
//! adversary model to cross-check the analytic PMFs.

pub mod attacker;
pub mod config;
pub mod divergence;
pub mod error;
pub mod outcome;
pub mod pattern;
pub mod pgd;
pub mod relaxed;
pub mod sim;
pub mod solver;
pub mod tables;
pub mod waterfill;

pub use attacker::{attacked_pmfs, kld_original, MaliciousPmfPair};
pub use config::{validate_config, SystemConfig};
pub use error::ModelError;
pub use outcome::OutcomeSpace;
pub use pattern::{count_malicious, DevicePattern};
pub use pgd::{grad_d0, pgd_multistart, project_simplex, PgdResult, PgdSettings};
pub use relaxed::{joint_pmf, kld_relaxed, lift_pmf_to_theta, RelaxedVariables};
pub use sim::{empirical_kld, sample_outcome, Hypothesis, KldEstimate, SimBatch};
pub use solver::{solve_relaxed, GuaranteeResult, SolverSettings};
pub use tables::{CoefficientTables, Family, TableLimits};
pub use waterfill::{capped_waterfill, WaterfillItem, WaterfillProblem, WaterfillSolution};
