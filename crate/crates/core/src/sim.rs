//! Monte Carlo sampling of the adversary model.
//!
//! Trial `t` of a batch with seed `s` draws from stream `t` of a ChaCha8
//! generator keyed by `s`, so every trial is reproducible on its own.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::attacker::{attacked_pmfs, MaliciousPmfPair};
use crate::config::SystemConfig;
use crate::error::ModelError;
use crate::tables::CoefficientTables;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("a batch needs at least one trial")]
    NoTrials,
    #[error("outcome {outcome} was sampled but has probability 0 under H1")]
    ImpossibleOutcome { outcome: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    H0,
    H1,
}

/// Draws outcome indices for one hypothesis and attacker.
#[derive(Debug, Clone)]
pub struct Sampler {
    cfg: SystemConfig,
    honest: WeightedIndex<f64>,
    malicious: WeightedIndex<f64>,
}

impl Sampler {
    pub fn new(
        cfg: &SystemConfig,
        dist: &MaliciousPmfPair,
        hypothesis: Hypothesis,
    ) -> Result<Self, SimError> {
        cfg.validate_structure()?;
        dist.check_alphabet(cfg.alphabet_size)?;
        let (honest, malicious) = match hypothesis {
            Hypothesis::H1 => (&cfg.honest_pmf_h1, &dist.pb),
            Hypothesis::H0 => (&cfg.honest_pmf_h0, &dist.qb),
        };
        let weighted = |pmf: &[f64]| {
            WeightedIndex::new(pmf.iter().copied()).expect("validated PMF has positive mass")
        };
        Ok(Self {
            cfg: cfg.clone(),
            honest: weighted(honest),
            malicious: weighted(malicious),
        })
    }

    /// One stored-data outcome: compromise flags, then the DSA flag, then
    /// every device's slots in order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let cfg = &self.cfg;
        let compromised: Vec<bool> = (0..cfg.num_devices)
            .map(|_| rng.random_bool(cfg.compromise_prob))
            .collect();
        let dsa_success = rng.random_bool(cfg.dsa_success_prob);
        let start_plus = cfg.attack_start_plus();
        let mut index = 0usize;
        for &bad in &compromised {
            for l in 1..=cfg.chain_length {
                let falsified =
                    bad && (l > cfg.honest_prefix || (dsa_success && l >= start_plus));
                let symbol = if falsified {
                    self.malicious.sample(rng)
                } else {
                    self.honest.sample(rng)
                };
                index = index * cfg.alphabet_size + symbol;
            }
        }
        index
    }
}

/// Draws a single outcome index.
pub fn sample_outcome<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    dist: &MaliciousPmfPair,
    hypothesis: Hypothesis,
    rng: &mut R,
) -> Result<usize, SimError> {
    Ok(Sampler::new(cfg, dist, hypothesis)?.sample(rng))
}

/// Generator for trial `trial` of a batch seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimBatch {
    pub num_trials: u64,
    pub seed: u64,
    pub hypothesis: Hypothesis,
    pub dist: MaliciousPmfPair,
}

impl SimBatch {
    /// Outcome counts over all trials.
    pub fn histogram(&self, tables: &CoefficientTables) -> Result<Vec<u64>, SimError> {
        if self.num_trials == 0 {
            return Err(SimError::NoTrials);
        }
        let sampler = Sampler::new(tables.config(), &self.dist, self.hypothesis)?;
        let base = ChaCha8Rng::seed_from_u64(self.seed);
        let mut counts = vec![0u64; tables.num_outcomes()];
        for trial in 0..self.num_trials {
            let mut rng = base.clone();
            rng.set_stream(trial);
            counts[sampler.sample(&mut rng)] += 1;
        }
        Ok(counts)
    }
}

/// Plug-in estimate of `D0` with its jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KldEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// `sum_i q^_i ln(q^_i / p_i)` from H0 samples against the analytic H1 PMF.
pub fn empirical_kld(
    tables: &CoefficientTables,
    dist: &MaliciousPmfPair,
    num_trials: u64,
    seed: u64,
) -> Result<KldEstimate, SimError> {
    let batch = SimBatch {
        num_trials,
        seed,
        hypothesis: Hypothesis::H0,
        dist: dist.clone(),
    };
    let counts = batch.histogram(tables)?;
    let (p, _) = attacked_pmfs(tables, dist);
    plug_in_with_jackknife(&counts, &p)
}

fn plug_in_with_jackknife(counts: &[u64], p: &[f64]) -> Result<KldEstimate, SimError> {
    let n: u64 = counts.iter().sum();
    let nf = n as f64;
    // S = sum_i n_i ln(n_i / p_i); D = S / n - ln n.
    let mut s = 0.0;
    for (i, (&c, &pi)) in counts.iter().zip(p).enumerate() {
        if c == 0 {
            continue;
        }
        if pi <= 0.0 {
            return Err(SimError::ImpossibleOutcome { outcome: i });
        }
        s += c as f64 * (c as f64 / pi).ln();
    }
    let estimate = s / nf - nf.ln();
    if n < 2 {
        return Ok(KldEstimate {
            estimate,
            std_error: f64::NAN,
        });
    }
    // Leaving out one trial of outcome i only changes that outcome's term.
    let leave_one_out = |c: u64, pi: f64| {
        let cf = c as f64;
        let mut t = s - cf * (cf / pi).ln();
        if c > 1 {
            t += (cf - 1.0) * ((cf - 1.0) / pi).ln();
        }
        t / (nf - 1.0) - (nf - 1.0).ln()
    };
    let observed = || counts.iter().zip(p).filter(|(&c, _)| c > 0);
    let mean = observed()
        .map(|(&c, &pi)| c as f64 * leave_one_out(c, pi))
        .sum::<f64>()
        / nf;
    let spread: f64 = observed()
        .map(|(&c, &pi)| {
            let d = leave_one_out(c, pi) - mean;
            c as f64 * d * d
        })
        .sum();
    Ok(KldEstimate {
        estimate,
        std_error: ((nf - 1.0) / nf * spread).sqrt(),
    })
}
