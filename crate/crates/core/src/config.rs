//! Scenario parameters and their validity checks.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Tolerance on the normalization of a probability vector.
pub const PMF_SUM_TOL: f64 = 1e-12;

/// Every parameter of one detection scenario.
///
/// `honest_prefix` is the number of authentic blocks built before the attack
/// starts (L_0) and `attack_start` is the first block index the attacker
/// rewrites through a double-spending attack (L_A).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub alphabet_size: usize,
    pub num_devices: usize,
    pub chain_length: usize,
    pub honest_prefix: usize,
    pub attack_start: usize,
    pub compromise_prob: f64,
    pub dsa_success_prob: f64,
    pub honest_pmf_h1: Vec<f64>,
    pub honest_pmf_h0: Vec<f64>,
}

impl SystemConfig {
    /// The binary-alphabet, four-device, four-block scenario used for the
    /// comparison figures, with the given attack parameters.
    pub fn reference(
        compromise_prob: f64,
        dsa_success_prob: f64,
        honest_prefix: usize,
        attack_start: usize,
    ) -> Self {
        Self {
            alphabet_size: 2,
            num_devices: 4,
            chain_length: 4,
            honest_prefix,
            attack_start,
            compromise_prob,
            dsa_success_prob,
            honest_pmf_h1: vec![0.1, 0.9],
            honest_pmf_h0: vec![0.9, 0.1],
        }
    }

    /// Full validation: structural checks plus `0 < alpha <= 1`.
    pub fn validate(&self) -> Result<(), ModelError> {
        self.validate_structure()?;
        if !(self.compromise_prob > 0.0 && self.compromise_prob <= 1.0) {
            return Err(ModelError::CompromiseProb(self.compromise_prob));
        }
        Ok(())
    }

    /// Every check except the lower bound `alpha > 0`.
    ///
    /// The attacker-free limit `alpha = 0` is a well-defined (trivial) model;
    /// evaluating it is useful as a sanity check even though it is excluded
    /// from the optimization problem.
    pub fn validate_structure(&self) -> Result<(), ModelError> {
        if self.alphabet_size < 2 {
            return Err(ModelError::TooSmall {
                what: "alphabet size",
                min: 2,
                got: self.alphabet_size,
            });
        }
        if self.num_devices < 1 {
            return Err(ModelError::TooSmall {
                what: "number of devices",
                min: 1,
                got: self.num_devices,
            });
        }
        if self.chain_length < 1 {
            return Err(ModelError::TooSmall {
                what: "chain length",
                min: 1,
                got: self.chain_length,
            });
        }
        if self.attack_start > self.honest_prefix || self.honest_prefix >= self.chain_length {
            return Err(ModelError::BlockOrder {
                attack_start: self.attack_start,
                honest_prefix: self.honest_prefix,
                chain_length: self.chain_length,
            });
        }
        if self.attack_start == 0 && self.honest_prefix > 0 {
            return Err(ModelError::ZeroAttackStart(self.honest_prefix));
        }
        if !(0.0..=1.0).contains(&self.compromise_prob) {
            return Err(ModelError::CompromiseProb(self.compromise_prob));
        }
        if !(0.0..=1.0).contains(&self.dsa_success_prob) {
            return Err(ModelError::DsaSuccessProb(self.dsa_success_prob));
        }
        check_honest_pmf("honest_pmf_h1", &self.honest_pmf_h1, self.alphabet_size)?;
        check_honest_pmf("honest_pmf_h0", &self.honest_pmf_h0, self.alphabet_size)?;
        Ok(())
    }

    /// `L_A^+ = max(L_A, 1)`, the first slot that a successful attack rewrites.
    pub fn attack_start_plus(&self) -> usize {
        self.attack_start.max(1)
    }

    /// Number of outcomes `|K|^(N*L)`, saturating at `u128::MAX`.
    pub fn outcome_space_size(&self) -> u128 {
        let exp = (self.num_devices * self.chain_length) as u32;
        (self.alphabet_size as u128)
            .checked_pow(exp)
            .unwrap_or(u128::MAX)
    }

    /// `(1-alpha)^(N-n) * alpha^n` with `0^0 = 1`.
    pub fn pattern_weight(&self, malicious: usize) -> f64 {
        let a = self.compromise_prob;
        (1.0 - a).powi((self.num_devices - malicious) as i32) * a.powi(malicious as i32)
    }
}

/// Checks a strictly positive probability vector of the given length.
pub fn check_honest_pmf(name: &'static str, pmf: &[f64], len: usize) -> Result<(), ModelError> {
    if pmf.len() != len {
        return Err(ModelError::PmfLength {
            name,
            got: pmf.len(),
            expected: len,
        });
    }
    for (index, &value) in pmf.iter().enumerate() {
        if !(value > 0.0 && value <= 1.0) {
            return Err(ModelError::PmfNotPositive { name, index, value });
        }
    }
    let sum: f64 = pmf.iter().sum();
    if (sum - 1.0).abs() > PMF_SUM_TOL {
        return Err(ModelError::PmfNotNormalized { name, sum });
    }
    Ok(())
}

/// Checks a probability vector whose entries may be zero.
pub fn check_pmf(name: &'static str, pmf: &[f64], len: usize) -> Result<(), ModelError> {
    if pmf.len() != len {
        return Err(ModelError::PmfLength {
            name,
            got: pmf.len(),
            expected: len,
        });
    }
    for (index, &value) in pmf.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(ModelError::PmfOutOfRange { name, index, value });
        }
    }
    let sum: f64 = pmf.iter().sum();
    if (sum - 1.0).abs() > PMF_SUM_TOL {
        return Err(ModelError::PmfNotNormalized { name, sum });
    }
    Ok(())
}

/// Validates a configuration and hands it back.
pub fn validate_config(cfg: SystemConfig) -> Result<SystemConfig, ModelError> {
    cfg.validate()?;
    Ok(cfg)
}
