//! Attacker PMF pairs and the attack model evaluated directly from them.

use serde::{Deserialize, Serialize};

use crate::config::check_pmf;
use crate::divergence::kl_divergence;
use crate::error::ModelError;
use crate::tables::{kron_devices, CoefficientTables};

/// Malicious-data PMFs `p^B` (under H1) and `q^B` (under H0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaliciousPmfPair {
    pub pb: Vec<f64>,
    pub qb: Vec<f64>,
}

impl MaliciousPmfPair {
    pub fn new(pb: Vec<f64>, qb: Vec<f64>) -> Result<Self, ModelError> {
        check_pmf("p^B", &pb, pb.len())?;
        check_pmf("q^B", &qb, pb.len())?;
        Ok(Self { pb, qb })
    }

    pub fn uniform(alphabet_size: usize) -> Self {
        let u = vec![1.0 / alphabet_size as f64; alphabet_size];
        Self {
            pb: u.clone(),
            qb: u,
        }
    }

    /// The attacker that mimics honest data under both hypotheses.
    pub fn honest(cfg: &crate::config::SystemConfig) -> Self {
        Self {
            pb: cfg.honest_pmf_h1.clone(),
            qb: cfg.honest_pmf_h0.clone(),
        }
    }

    pub fn check_alphabet(&self, alphabet_size: usize) -> Result<(), ModelError> {
        check_pmf("p^B", &self.pb, alphabet_size)?;
        check_pmf("q^B", &self.qb, alphabet_size)
    }
}

/// Per-sequence factors of one device under one hypothesis and DSA branch:
/// `(1-alpha) * honest(o) + alpha * kept(o) * attacker(o)`.
pub(crate) fn device_branch_factors(
    tables: &CoefficientTables,
    h: usize,
    success: bool,
    attacker_pmf: &[f64],
) -> Vec<f64> {
    let cfg = tables.config();
    let seqs = tables.sequences();
    let alpha = cfg.compromise_prob;
    let falsified = seqs.attacker_products(success, attacker_pmf);
    let kept = seqs.kept(success, h);
    seqs.full[h]
        .iter()
        .zip(kept)
        .zip(&falsified)
        .map(|((&f, &k), &b)| (1.0 - alpha) * f + alpha * k * b)
        .collect()
}

/// Joint PMF of all stored data under one hypothesis, evaluated as the
/// DSA-branch mixture of per-device independent products.
pub(crate) fn mixture_pmf(tables: &CoefficientTables, h: usize, attacker_pmf: &[f64]) -> Vec<f64> {
    let cfg = tables.config();
    let n = cfg.num_devices;
    let ps = cfg.dsa_success_prob;
    let succ = device_branch_factors(tables, h, true, attacker_pmf);
    let fail = device_branch_factors(tables, h, false, attacker_pmf);
    let a = kron_devices(n, |_| &succ);
    let b = kron_devices(n, |_| &fail);
    a.iter()
        .zip(&b)
        .map(|(&x, &y)| ps * x + (1.0 - ps) * y)
        .collect()
}

/// `(p, q)`: the joint PMFs under H1 and H0 for a given attacker.
pub fn attacked_pmfs(tables: &CoefficientTables, dist: &MaliciousPmfPair) -> (Vec<f64>, Vec<f64>) {
    (
        mixture_pmf(tables, 0, &dist.pb),
        mixture_pmf(tables, 1, &dist.qb),
    )
}

/// `D0(p^B, q^B) = D(q || p)` in nats; `+inf` if some `q_i > 0 = p_i`.
pub fn kld_original(tables: &CoefficientTables, dist: &MaliciousPmfPair) -> f64 {
    let (p, q) = attacked_pmfs(tables, dist);
    kl_divergence(&q, &p)
}
