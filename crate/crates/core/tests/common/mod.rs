#![allow(dead_code)]

use biot_guarantee::{CoefficientTables, Family, RelaxedVariables, SystemConfig};
use rand::Rng;

pub fn small_instance() -> SystemConfig {
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

/// Uniform point of the simplex with every entry at least `floor`.
pub fn positive_pmf(rng: &mut impl Rng, k: usize, floor: f64) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    let scale = 1.0 - floor * k as f64;
    e.iter().map(|x| floor + scale * x / s).collect()
}

/// A random valid scenario with at most `max_outcomes` outcomes.
pub fn random_config(rng: &mut impl Rng, max_outcomes: u64) -> SystemConfig {
    loop {
        let k = rng.random_range(2..=4usize);
        let n = rng.random_range(1..=3usize);
        let l = rng.random_range(1..=6usize);
        if (k as u64).pow((n * l) as u32) > max_outcomes {
            continue;
        }
        let l0 = rng.random_range(0..l);
        let la = if l0 == 0 { 0 } else { rng.random_range(1..=l0) };
        let alpha = match rng.random_range(0..10) {
            0 => 1.0,
            _ => rng.random_range(0.02..1.0),
        };
        let ps = match rng.random_range(0..10) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random_range(0.0..1.0),
        };
        return SystemConfig {
            alphabet_size: k,
            num_devices: n,
            chain_length: l,
            honest_prefix: l0,
            attack_start: la,
            compromise_prob: alpha,
            dsa_success_prob: ps,
            honest_pmf_h1: positive_pmf(rng, k, 0.01),
            honest_pmf_h0: positive_pmf(rng, k, 0.01),
        };
    }
}

/// Euclidean projection of `v` onto `{x in [0,1]^n : c.x = b}` by bisection
/// on the multiplier of the equality.
pub fn project_box_hyperplane(c: &[f64], b: f64, v: &[f64]) -> Vec<f64> {
    let at = |lambda: f64| -> Vec<f64> {
        v.iter()
            .zip(c)
            .map(|(&vi, &ci)| (vi - lambda * ci).clamp(0.0, 1.0))
            .collect()
    };
    let dot = |x: &[f64]| x.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (&vi, &ci) in v.iter().zip(c) {
        if ci > 0.0 {
            lo = lo.min((vi - 1.0) / ci);
            hi = hi.max(vi / ci);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dot(&at(mid)) > b {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// A random feasible point of the relaxed problem.
pub fn random_feasible(rng: &mut impl Rng, tables: &CoefficientTables) -> RelaxedVariables {
    let n = tables.num_outcomes();
    let columns = Family::ALL.map(|family| {
        let table = tables.family(family);
        (0..table.num_columns())
            .map(|k| {
                let v: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..1.5)).collect();
                project_box_hyperplane(table.column(k), table.budgets()[k], &v)
            })
            .collect()
    });
    RelaxedVariables::from_columns(tables, columns).unwrap()
}
