//! Projected gradient descent on the original (nonconvex) problem.
//!
//! Minimizes `D0(p^B, q^B) = D(q || p)` over the product of two probability
//! simplexes, restarting from the uniform pair and from random PMF pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::attacker::{device_branch_factors, mixture_pmf, MaliciousPmfPair};
use crate::divergence::{kl_divergence, CompensatedSum};
use crate::error::ModelError;
use crate::tables::CoefficientTables;

/// Floor applied to `q_i` inside logarithms of the gradient weights.
const LOG_FLOOR: f64 = 1e-300;
/// Backtracking gives up once the trial step drops below this.
const MIN_STEP: f64 = 1e-20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PgdError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot project a vector with non-finite entry {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("cannot project an empty vector")]
    Empty,
    #[error("gradient undefined: outcome {outcome} has p = 0 < q = {q}")]
    UndefinedGradient { outcome: usize, q: f64 },
    #[error("invalid PGD settings: {0}")]
    Settings(&'static str),
    #[error("every start produced a non-finite objective")]
    AllStartsDiverged,
}

/// Step rule and multistart parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PgdSettings {
    pub num_starts: usize,
    pub max_iters: usize,
    pub initial_step: f64,
    pub backtrack: f64,
    pub armijo: f64,
    /// Stop once the projected-gradient norm falls below this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for PgdSettings {
    fn default() -> Self {
        Self {
            num_starts: 20,
            max_iters: 2000,
            initial_step: 0.1,
            backtrack: 0.5,
            armijo: 1e-4,
            tolerance: 1e-8,
            seed: 0,
        }
    }
}

impl PgdSettings {
    pub fn validate(&self) -> Result<(), PgdError> {
        if self.num_starts == 0 {
            return Err(PgdError::Settings("num_starts must be at least 1"));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(PgdError::Settings("initial_step must be positive"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(PgdError::Settings("backtrack must lie in (0, 1)"));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(PgdError::Settings("armijo must lie in (0, 1)"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(PgdError::Settings("tolerance must be non-negative"));
        }
        Ok(())
    }
}

/// Outcome of one descent.
#[derive(Debug, Clone, PartialEq)]
pub struct PgdRun {
    pub value: f64,
    pub argmin: MaliciousPmfPair,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// Best of all starts plus every start's trace.
#[derive(Debug, Clone, PartialEq)]
pub struct PgdResult {
    pub value: f64,
    pub argmin: MaliciousPmfPair,
    pub best_start: usize,
    pub traces: Vec<Vec<f64>>,
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>, PgdError> {
    if v.is_empty() {
        return Err(PgdError::Empty);
    }
    if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| !x.is_finite()) {
        return Err(PgdError::NonFinite { index, value });
    }
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            shift = t;
        } else {
            break;
        }
    }
    Ok(v.iter().map(|&x| (x - shift).clamp(0.0, 1.0)).collect())
}

/// `d/d b_k prod_k' b_k'^c_k'`, exact at zero entries.
fn power_product_grad(base: &[f64], exps: &[u32], out: &mut [f64]) {
    for (k, slot) in out.iter_mut().enumerate() {
        let c = exps[k];
        *slot = if c == 0 {
            0.0
        } else {
            let mut v = c as f64;
            for (k2, (&b, &e)) in base.iter().zip(exps).enumerate() {
                let e = if k2 == k { e - 1 } else { e };
                if e > 0 {
                    v *= b.powi(e as i32);
                }
            }
            v
        };
    }
}

/// `M[o] = sum_j sum_{i: o_j(i) = o} w_i prod_{j' != j} f[o_j'(i)]`.
fn device_contraction(weights: &[f64], f: &[f64], num_devices: usize) -> Vec<f64> {
    let n_seq = f.len();
    let mut out = vec![0.0; n_seq];
    let mut digits = vec![0usize; num_devices];
    let mut suffix = vec![1.0; num_devices + 1];
    for &w in weights {
        if w != 0.0 {
            for j in (0..num_devices).rev() {
                suffix[j] = suffix[j + 1] * f[digits[j]];
            }
            let mut prefix = 1.0;
            for j in 0..num_devices {
                out[digits[j]] += w * prefix * suffix[j + 1];
                prefix *= f[digits[j]];
            }
        }
        for j in (0..num_devices).rev() {
            digits[j] += 1;
            if digits[j] < n_seq {
                break;
            }
            digits[j] = 0;
        }
    }
    out
}

/// `sum_i w_i d x_i / d b` where `x` is the joint PMF under hypothesis `h`
/// (0 for H1, 1 for H0) and `b` the attacker PMF used there.
fn mixture_gradient(tables: &CoefficientTables, h: usize, b: &[f64], weights: &[f64]) -> Vec<f64> {
    let cfg = tables.config();
    let seqs = tables.sequences();
    let k = cfg.alphabet_size;
    let alpha = cfg.compromise_prob;
    let mut grad = vec![0.0; k];
    let mut d = vec![0.0; k];
    for (success, w_branch) in [
        (true, cfg.dsa_success_prob),
        (false, 1.0 - cfg.dsa_success_prob),
    ] {
        if w_branch == 0.0 {
            continue;
        }
        let f = device_branch_factors(tables, h, success, b);
        let m = device_contraction(weights, &f, cfg.num_devices);
        let kept = seqs.kept(success, h);
        for (seq, (&mo, &ko)) in m.iter().zip(kept).enumerate() {
            if mo == 0.0 || ko == 0.0 {
                continue;
            }
            power_product_grad(b, seqs.counts(success, seq), &mut d);
            let scale = w_branch * alpha * mo * ko;
            for (g, &dk) in grad.iter_mut().zip(&d) {
                *g += scale * dk;
            }
        }
    }
    grad
}

/// Joint PMFs `(p, q)` for an attacker pair.
fn pmfs(tables: &CoefficientTables, dist: &MaliciousPmfPair) -> (Vec<f64>, Vec<f64>) {
    (
        mixture_pmf(tables, 0, &dist.pb),
        mixture_pmf(tables, 1, &dist.qb),
    )
}

/// Gradient of `D0` with respect to `p^B` and `q^B`.
pub fn grad_d0(
    tables: &CoefficientTables,
    dist: &MaliciousPmfPair,
) -> Result<(Vec<f64>, Vec<f64>), PgdError> {
    dist.check_alphabet(tables.config().alphabet_size)?;
    let (p, q) = pmfs(tables, dist);
    let mut wp = vec![0.0; p.len()];
    let mut wq = vec![0.0; p.len()];
    for (i, (&pi, &qi)) in p.iter().zip(&q).enumerate() {
        if pi <= 0.0 {
            if qi > 0.0 {
                return Err(PgdError::UndefinedGradient { outcome: i, q: qi });
            }
            continue;
        }
        wp[i] = -qi / pi;
        wq[i] = 1.0 + (qi.max(LOG_FLOOR) / pi).ln();
    }
    Ok((
        mixture_gradient(tables, 0, &dist.pb, &wp),
        mixture_gradient(tables, 1, &dist.qb, &wq),
    ))
}

fn objective(tables: &CoefficientTables, dist: &MaliciousPmfPair) -> f64 {
    let (p, q) = pmfs(tables, dist);
    kl_divergence(&q, &p)
}

fn projected_step(
    dist: &MaliciousPmfPair,
    gp: &[f64],
    gq: &[f64],
    step: f64,
) -> Result<MaliciousPmfPair, PgdError> {
    let shift = |x: &[f64], g: &[f64]| -> Vec<f64> {
        x.iter().zip(g).map(|(&a, &b)| a - step * b).collect()
    };
    Ok(MaliciousPmfPair {
        pb: project_simplex(&shift(&dist.pb, gp))?,
        qb: project_simplex(&shift(&dist.qb, gq))?,
    })
}

/// `<g, y - x>` over both PMFs.
fn directional(
    from: &MaliciousPmfPair,
    to: &MaliciousPmfPair,
    gp: &[f64],
    gq: &[f64],
) -> f64 {
    let mut acc = CompensatedSum::default();
    for (g, (x, y)) in gp.iter().zip(from.pb.iter().zip(&to.pb)) {
        acc.add(g * (y - x));
    }
    for (g, (x, y)) in gq.iter().zip(from.qb.iter().zip(&to.qb)) {
        acc.add(g * (y - x));
    }
    acc.value()
}

fn distance(a: &MaliciousPmfPair, b: &MaliciousPmfPair) -> f64 {
    a.pb.iter()
        .zip(&b.pb)
        .chain(a.qb.iter().zip(&b.qb))
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// One Armijo projected-gradient descent from `start`.
pub fn pgd_descent(
    tables: &CoefficientTables,
    start: MaliciousPmfPair,
    settings: &PgdSettings,
) -> Result<PgdRun, PgdError> {
    settings.validate()?;
    start.check_alphabet(tables.config().alphabet_size)?;
    let mut x = start;
    let mut value = objective(tables, &x);
    let mut trace = vec![value];
    let mut converged = false;
    if !value.is_finite() {
        return Ok(PgdRun {
            value,
            argmin: x,
            trace,
            converged,
        });
    }
    for _ in 0..settings.max_iters {
        let (gp, gq) = grad_d0(tables, &x)?;
        let mapped = projected_step(&x, &gp, &gq, 1.0)?;
        if distance(&x, &mapped) < settings.tolerance {
            converged = true;
            break;
        }
        let mut step = settings.initial_step;
        let mut accepted = None;
        while step >= MIN_STEP {
            let y = projected_step(&x, &gp, &gq, step)?;
            let fy = objective(tables, &y);
            let decrease = directional(&x, &y, &gp, &gq);
            if fy.is_finite() && fy <= value + settings.armijo * decrease {
                accepted = Some((y, fy));
                break;
            }
            step *= settings.backtrack;
        }
        match accepted {
            Some((y, fy)) => {
                x = y;
                value = fy;
                trace.push(value);
            }
            None => {
                converged = true;
                break;
            }
        }
    }
    Ok(PgdRun {
        value,
        argmin: x,
        trace,
        converged,
    })
}

/// A point drawn uniformly from the probability simplex.
pub fn random_pmf(rng: &mut impl Rng, size: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..size).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

/// Start `s` of a multistart run: uniform for `s = 0`, otherwise random
/// from stream `s` of the seeded generator.
pub fn start_point(alphabet_size: usize, seed: u64, s: usize) -> MaliciousPmfPair {
    if s == 0 {
        return MaliciousPmfPair::uniform(alphabet_size);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s as u64);
    let pb = random_pmf(&mut rng, alphabet_size);
    let qb = random_pmf(&mut rng, alphabet_size);
    MaliciousPmfPair { pb, qb }
}

/// Minimum of `D0` found over `num_starts` descents.
pub fn pgd_multistart(
    tables: &CoefficientTables,
    settings: &PgdSettings,
) -> Result<PgdResult, PgdError> {
    settings.validate()?;
    let k = tables.config().alphabet_size;
    let mut best: Option<(usize, PgdRun)> = None;
    let mut traces = Vec::with_capacity(settings.num_starts);
    for s in 0..settings.num_starts {
        let run = pgd_descent(tables, start_point(k, settings.seed, s), settings)?;
        traces.push(run.trace.clone());
        if !run.value.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|(_, b)| run.value < b.value) {
            best = Some((s, run));
        }
    }
    let (best_start, run) = best.ok_or(PgdError::AllStartsDiverged)?;
    Ok(PgdResult {
        value: run.value,
        argmin: run.argmin,
        best_start,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacker::kld_original;
    use crate::config::SystemConfig;

    fn small() -> SystemConfig {
        SystemConfig {
            alphabet_size: 2,
            num_devices: 1,
            chain_length: 2,
            honest_prefix: 1,
            attack_start: 1,
            compromise_prob: 0.5,
            dsa_success_prob: 0.5,
            honest_pmf_h1: vec![0.1, 0.9],
            honest_pmf_h0: vec![0.9, 0.1],
        }
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_simplex(&[0.3, 0.7]).unwrap(), vec![0.3, 0.7]);
        assert_eq!(project_simplex(&[2.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        let v = project_simplex(&[0.6, 0.6]).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-15 && (v[1] - 0.5).abs() < 1e-15);
        assert!(matches!(
            project_simplex(&[0.1, f64::NAN]),
            Err(PgdError::NonFinite { index: 1, .. })
        ));
        assert_eq!(project_simplex(&[]), Err(PgdError::Empty));
    }

    fn finite_difference(t: &CoefficientTables, dist: &MaliciousPmfPair) -> (Vec<f64>, Vec<f64>) {
        let h = 1e-6;
        let k = dist.pb.len();
        let mut gp = vec![0.0; k];
        let mut gq = vec![0.0; k];
        for c in 0..k {
            for (target, out) in [(0, &mut gp), (1, &mut gq)] {
                let mut plus = dist.clone();
                let mut minus = dist.clone();
                let (a, b) = if target == 0 {
                    (&mut plus.pb, &mut minus.pb)
                } else {
                    (&mut plus.qb, &mut minus.qb)
                };
                a[c] += h;
                b[c] -= h;
                out[c] = (kld_original(t, &plus) - kld_original(t, &minus)) / (2.0 * h);
            }
        }
        (gp, gq)
    }

    #[test]
    fn gradient_matches_finite_differences_multi_device() {
        let cfg = SystemConfig {
            alphabet_size: 3,
            num_devices: 2,
            chain_length: 3,
            honest_prefix: 2,
            attack_start: 1,
            compromise_prob: 0.4,
            dsa_success_prob: 0.3,
            honest_pmf_h1: vec![0.2, 0.3, 0.5],
            honest_pmf_h0: vec![0.6, 0.3, 0.1],
        };
        let t = CoefficientTables::build(&cfg).unwrap();
        let dist = MaliciousPmfPair::new(vec![0.25, 0.35, 0.4], vec![0.5, 0.3, 0.2]).unwrap();
        let (gp, gq) = grad_d0(&t, &dist).unwrap();
        let (fp, fq) = finite_difference(&t, &dist);
        for (a, b) in gp.iter().chain(&gq).zip(fp.iter().chain(&fq)) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn diagonal_is_stationary_for_identical_hypotheses() {
        let mut cfg = small();
        cfg.honest_pmf_h0 = cfg.honest_pmf_h1.clone();
        let t = CoefficientTables::build(&cfg).unwrap();
        let dist = MaliciousPmfPair::new(vec![0.3, 0.7], vec![0.3, 0.7]).unwrap();
        let (gp, gq) = grad_d0(&t, &dist).unwrap();
        let dir = [0.4, -0.4];
        let along: f64 = (0..2).map(|k| dir[k] * (gp[k] + gq[k])).sum();
        assert!(along.abs() < 1e-14);
    }

    #[test]
    fn absent_symbol_has_zero_gradient() {
        // With no compromised devices no attacked slot carries probability.
        let mut cfg = small();
        cfg.compromise_prob = 0.0;
        let t = CoefficientTables::build(&cfg).unwrap();
        let dist = MaliciousPmfPair::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let (gp, gq) = grad_d0(&t, &dist).unwrap();
        assert_eq!(gp, vec![0.0, 0.0]);
        assert_eq!(gq, vec![0.0, 0.0]);
    }

    #[test]
    fn traces_are_nonincreasing_and_deterministic() {
        let t = CoefficientTables::build(&small()).unwrap();
        let settings = PgdSettings {
            num_starts: 5,
            seed: 7,
            ..PgdSettings::default()
        };
        let a = pgd_multistart(&t, &settings).unwrap();
        let b = pgd_multistart(&t, &settings).unwrap();
        assert_eq!(a, b);
        for trace in &a.traces {
            assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        }
        let s = a.argmin.pb.iter().sum::<f64>();
        assert!((s - 1.0).abs() < 1e-12);
        assert!((kld_original(&t, &a.argmin) - a.value).abs() < 1e-15);
    }

    #[test]
    fn identical_hypotheses_give_zero() {
        let mut cfg = small();
        cfg.honest_pmf_h0 = cfg.honest_pmf_h1.clone();
        let t = CoefficientTables::build(&cfg).unwrap();
        let settings = PgdSettings {
            num_starts: 4,
            ..PgdSettings::default()
        };
        let r = pgd_multistart(&t, &settings).unwrap();
        assert!(r.value.abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn settings_are_checked() {
        let t = CoefficientTables::build(&small()).unwrap();
        let bad = PgdSettings {
            num_starts: 0,
            ..PgdSettings::default()
        };
        assert!(matches!(pgd_multistart(&t, &bad), Err(PgdError::Settings(_))));
    }
}
