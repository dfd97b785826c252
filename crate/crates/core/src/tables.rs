//! Coefficient tables of the expanded joint PMFs.
//!
//! Under either hypothesis the probability of outcome `i` splits into the
//! all-honest term (`Psi_i` under H1, `Theta_i` under H0) plus, for every
//! compromise pattern `m` and each DSA branch, a coefficient times a product
//! of attacker PMF entries:
//!
//! | family | coefficient | branch      | hypothesis | falsified slots |
//! |--------|-------------|-------------|------------|-----------------|
//! | `P1`   | Gamma       | DSA success | H1         | `L_A^+ ..= L`   |
//! | `P2`   | Lambda      | DSA failure | H1         | `L_0+1 ..= L`   |
//! | `Q1`   | Delta       | DSA success | H0         | `L_A^+ ..= L`   |
//! | `Q2`   | Phi         | DSA failure | H0         | `L_0+1 ..= L`   |
//!
//! Every coefficient is a pattern prefactor times a product over devices of
//! per-device honest factors, so whole columns are built as Kronecker
//! products of per-device vectors indexed by the device's own sequence.

use crate::config::SystemConfig;
use crate::error::ModelError;
use crate::outcome::OutcomeSpace;
use crate::pattern::DevicePattern;

/// One of the four relaxed variable families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    P1,
    P2,
    Q1,
    Q2,
}

impl Family {
    /// Update order inside one pattern of a coordinate-descent sweep.
    pub const ALL: [Family; 4] = [Family::P1, Family::P2, Family::Q1, Family::Q2];

    pub fn slot(self) -> usize {
        match self {
            Family::P1 => 0,
            Family::P2 => 1,
            Family::Q1 => 2,
            Family::Q2 => 3,
        }
    }

    /// True for the families entering the H1 PMF (`B_i`).
    pub fn is_h1(self) -> bool {
        matches!(self, Family::P1 | Family::P2)
    }

    /// True for the DSA-success branch.
    pub fn is_success_branch(self) -> bool {
        matches!(self, Family::P1 | Family::Q1)
    }

    pub fn coefficient_name(self) -> &'static str {
        match self {
            Family::P1 => "Gamma",
            Family::P2 => "Lambda",
            Family::Q1 => "Delta",
            Family::Q2 => "Phi",
        }
    }
}

/// Limits guarding dense table construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableLimits {
    /// Largest accepted `|K|^(N*L)`.
    pub max_outcomes: u128,
    /// Largest accepted number of stored coefficients across all families.
    pub max_entries: u128,
}

impl Default for TableLimits {
    fn default() -> Self {
        Self {
            max_outcomes: 1 << 24,
            max_entries: 1 << 28,
        }
    }
}

/// Coefficients of one family, restricted to its active patterns.
#[derive(Debug, Clone)]
pub struct FamilyTable {
    family: Family,
    patterns: Vec<DevicePattern>,
    budgets: Vec<f64>,
    coeffs: Vec<f64>,
    num_outcomes: usize,
}

impl FamilyTable {
    pub fn family(&self) -> Family {
        self.family
    }

    /// The active set, e.g. `M_Gamma` for `P1`.
    pub fn patterns(&self) -> &[DevicePattern] {
        &self.patterns
    }

    /// Right-hand side of the weighted budget for each active pattern.
    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    pub fn num_columns(&self) -> usize {
        self.patterns.len()
    }

    /// Coefficient column of the `k`-th active pattern, indexed by outcome.
    pub fn column(&self, k: usize) -> &[f64] {
        &self.coeffs[k * self.num_outcomes..(k + 1) * self.num_outcomes]
    }

    /// Position of pattern `m` in the active set.
    pub fn position(&self, m: u64) -> Option<usize> {
        self.patterns.iter().position(|p| p.index() == m)
    }
}

/// Per-device-sequence honest products and symbol counts.
#[derive(Debug, Clone)]
pub struct SequenceTables {
    pub(crate) alphabet_size: usize,
    /// `prod_{l=1}^{L} p^H`, then the same under `q^H`.
    pub(crate) full: [Vec<f64>; 2],
    /// `prod_{l=1}^{L_A-1}` (slots kept by a successful attack).
    pub(crate) pre_attack: [Vec<f64>; 2],
    /// `prod_{l=1}^{L_0}` (slots kept by a failed attack).
    pub(crate) prefix: [Vec<f64>; 2],
    /// Symbol counts over slots `L_A^+ ..= L`, row-major `[sequence][symbol]`.
    pub(crate) attack_counts: Vec<u32>,
    /// Symbol counts over slots `L_0+1 ..= L`.
    pub(crate) tail_counts: Vec<u32>,
}

impl SequenceTables {
    /// Index 0 selects H1 (`p^H`), index 1 selects H0 (`q^H`).
    fn build(cfg: &SystemConfig, space: &OutcomeSpace) -> Self {
        let k = cfg.alphabet_size;
        let n_seq = space.sequences_per_device;
        let start_plus = cfg.attack_start_plus();
        let honest = [&cfg.honest_pmf_h1, &cfg.honest_pmf_h0];
        let mut full = [vec![1.0; n_seq], vec![1.0; n_seq]];
        let mut pre_attack = [vec![1.0; n_seq], vec![1.0; n_seq]];
        let mut prefix = [vec![1.0; n_seq], vec![1.0; n_seq]];
        let mut attack_counts = vec![0u32; n_seq * k];
        let mut tail_counts = vec![0u32; n_seq * k];
        for seq in 0..n_seq {
            for slot in 1..=cfg.chain_length {
                let s = space.sequence_symbol(seq, slot);
                for h in 0..2 {
                    let v = honest[h][s];
                    full[h][seq] *= v;
                    if slot < cfg.attack_start {
                        pre_attack[h][seq] *= v;
                    }
                    if slot <= cfg.honest_prefix {
                        prefix[h][seq] *= v;
                    }
                }
                if slot >= start_plus {
                    attack_counts[seq * k + s] += 1;
                }
                if slot > cfg.honest_prefix {
                    tail_counts[seq * k + s] += 1;
                }
            }
        }
        Self {
            alphabet_size: k,
            full,
            pre_attack,
            prefix,
            attack_counts,
            tail_counts,
        }
    }

    pub(crate) fn counts(&self, success_branch: bool, seq: usize) -> &[u32] {
        let k = self.alphabet_size;
        let table = if success_branch {
            &self.attack_counts
        } else {
            &self.tail_counts
        };
        &table[seq * k..(seq + 1) * k]
    }

    pub(crate) fn kept(&self, success_branch: bool, h: usize) -> &[f64] {
        if success_branch {
            &self.pre_attack[h]
        } else {
            &self.prefix[h]
        }
    }

    /// `prod_k pmf_k^counts_k` over the falsified slots of every sequence.
    pub(crate) fn attacker_products(&self, success_branch: bool, pmf: &[f64]) -> Vec<f64> {
        let n_seq = self.full[0].len();
        (0..n_seq)
            .map(|seq| power_product(pmf, self.counts(success_branch, seq)))
            .collect()
    }
}

/// `prod_k base_k^exp_k`, with `0^0 = 1`.
pub(crate) fn power_product(base: &[f64], exps: &[u32]) -> f64 {
    base.iter()
        .zip(exps)
        .filter(|(_, &e)| e > 0)
        .map(|(&b, &e)| b.powi(e as i32))
        .product()
}

/// Kronecker product over devices; device 1 is the most significant factor.
pub(crate) fn kron_devices<'a>(
    num_devices: usize,
    mut factor: impl FnMut(usize) -> &'a [f64],
) -> Vec<f64> {
    let mut out = vec![1.0];
    for j in 1..=num_devices {
        let v = factor(j);
        let mut next = Vec::with_capacity(out.len() * v.len());
        for &a in &out {
            next.extend(v.iter().map(|&b| a * b));
        }
        out = next;
    }
    out
}

/// All coefficient tables of one scenario. Immutable once built.
#[derive(Debug, Clone)]
pub struct CoefficientTables {
    config: SystemConfig,
    space: OutcomeSpace,
    psi: Vec<f64>,
    theta: Vec<f64>,
    families: [FamilyTable; 4],
    sequences: SequenceTables,
}

impl CoefficientTables {
    /// Builds every table with the default size limits.
    pub fn build(cfg: &SystemConfig) -> Result<Self, ModelError> {
        Self::build_with_limits(cfg, TableLimits::default())
    }

    /// Builds every table.
    ///
    /// Only the structural checks of the configuration are enforced here, so
    /// the attacker-free limit `alpha = 0` can still be evaluated.
    pub fn build_with_limits(cfg: &SystemConfig, limits: TableLimits) -> Result<Self, ModelError> {
        cfg.validate_structure()?;
        let size = cfg.outcome_space_size();
        if size > limits.max_outcomes {
            return Err(ModelError::OutcomeSpaceTooLarge {
                size,
                cap: limits.max_outcomes,
            });
        }
        let patterns_total = (1u128 << cfg.num_devices.min(127)) - 1;
        let entries = size.saturating_mul(patterns_total).saturating_mul(4);
        if entries > limits.max_entries {
            return Err(ModelError::TablesTooLarge {
                entries,
                limit: limits.max_entries,
            });
        }

        let space = OutcomeSpace::new(cfg.alphabet_size, cfg.num_devices, cfg.chain_length);
        let sequences = SequenceTables::build(cfg, &space);
        let n = cfg.num_devices;
        let honest_weight = cfg.pattern_weight(0);

        let scaled = |v: Vec<f64>, c: f64| v.into_iter().map(|x| x * c).collect::<Vec<_>>();
        let psi = scaled(kron_devices(n, |_| &sequences.full[0]), honest_weight);
        let theta = scaled(kron_devices(n, |_| &sequences.full[1]), honest_weight);

        let families = Family::ALL.map(|family| build_family(cfg, &space, &sequences, family));

        Ok(Self {
            config: cfg.clone(),
            space,
            psi,
            theta,
            families,
            sequences,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn num_outcomes(&self) -> usize {
        self.space.num_outcomes
    }

    /// `Psi_i`: probability under H1 of outcome `i` with every device honest.
    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    /// `Theta_i`: the same under H0.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn family(&self, family: Family) -> &FamilyTable {
        &self.families[family.slot()]
    }

    pub fn families(&self) -> &[FamilyTable; 4] {
        &self.families
    }

    /// `Gamma_{i,m}`, zero when `m` is inactive.
    pub fn coefficient(&self, family: Family, outcome: usize, m: u64) -> f64 {
        let table = self.family(family);
        table
            .position(m)
            .map_or(0.0, |k| table.column(k)[outcome])
    }

    /// `c^A_{i,j,k}`: occurrences of symbol `k` in device `j`'s slots `L_A^+ ..= L`.
    pub fn attack_count(&self, outcome: usize, device: usize, symbol: usize) -> u32 {
        let seq = self.space.device_sequence(outcome, device);
        self.sequences.counts(true, seq)[symbol]
    }

    /// `c^0_{i,j,k}`: occurrences of symbol `k` in device `j`'s slots `L_0+1 ..= L`.
    pub fn tail_count(&self, outcome: usize, device: usize, symbol: usize) -> u32 {
        let seq = self.space.device_sequence(outcome, device);
        self.sequences.counts(false, seq)[symbol]
    }

    pub(crate) fn sequences(&self) -> &SequenceTables {
        &self.sequences
    }
}

fn build_family(
    cfg: &SystemConfig,
    space: &OutcomeSpace,
    seqs: &SequenceTables,
    family: Family,
) -> FamilyTable {
    let h = if family.is_h1() { 0 } else { 1 };
    let success = family.is_success_branch();
    let branch_prob = if success {
        cfg.dsa_success_prob
    } else {
        1.0 - cfg.dsa_success_prob
    };
    let mut patterns = Vec::new();
    let mut budgets = Vec::new();
    let mut coeffs = Vec::new();
    for pattern in DevicePattern::all(cfg.num_devices) {
        let budget = branch_prob * cfg.pattern_weight(pattern.malicious_count());
        if budget <= 0.0 {
            continue;
        }
        let column = kron_devices(cfg.num_devices, |j| {
            if pattern.is_malicious(j) {
                seqs.kept(success, h)
            } else {
                &seqs.full[h]
            }
        });
        coeffs.extend(column.into_iter().map(|c| c * budget));
        patterns.push(pattern);
        budgets.push(budget);
    }
    FamilyTable {
        family,
        patterns,
        budgets,
        coeffs,
        num_outcomes: space.num_outcomes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

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

    /// Literal evaluation of a coefficient from its product definition.
    fn literal_coefficient(cfg: &SystemConfig, family: Family, outcome: usize, m: u64) -> f64 {
        let space = OutcomeSpace::new(cfg.alphabet_size, cfg.num_devices, cfg.chain_length);
        let r = space.decode(outcome).unwrap();
        let pattern = DevicePattern::new(m, cfg.num_devices).unwrap();
        let pmf = if family.is_h1() {
            &cfg.honest_pmf_h1
        } else {
            &cfg.honest_pmf_h0
        };
        let kept_until = if family.is_success_branch() {
            cfg.attack_start as isize - 1
        } else {
            cfg.honest_prefix as isize
        };
        let branch = if family.is_success_branch() {
            cfg.dsa_success_prob
        } else {
            1.0 - cfg.dsa_success_prob
        };
        let n_m = pattern.malicious_count();
        let a = cfg.compromise_prob;
        let mut value = branch * (1.0 - a).powi((cfg.num_devices - n_m) as i32) * a.powi(n_m as i32);
        for j in 1..=cfg.num_devices {
            let last = if pattern.is_malicious(j) {
                kept_until
            } else {
                cfg.chain_length as isize
            };
            for l in 1..=last {
                value *= pmf[r[j - 1][(l - 1) as usize]];
            }
        }
        value
    }

    #[test]
    fn small_instance_matches_literal_formulas() {
        let cfg = small();
        let t = CoefficientTables::build(&cfg).unwrap();
        assert_eq!(t.num_outcomes(), 4);
        for family in Family::ALL {
            assert_eq!(t.family(family).num_columns(), 1);
            for i in 0..4 {
                let got = t.coefficient(family, i, 1);
                let want = literal_coefficient(&cfg, family, i, 1);
                assert!((got - want).abs() < 1e-15, "{family:?} {i}: {got} vs {want}");
            }
        }
        // Gamma: nothing kept before L_A = 1, so every outcome gets P_s * alpha.
        assert_eq!(t.family(Family::P1).column(0), &[0.25; 4]);
        // Lambda keeps slot 1 under p^H.
        let lambda = t.family(Family::P2).column(0);
        assert!((lambda[0] - 0.025).abs() < 1e-15 && (lambda[3] - 0.225).abs() < 1e-15);
    }

    #[test]
    fn larger_instance_matches_literal_formulas() {
        let cfg = SystemConfig {
            alphabet_size: 3,
            num_devices: 2,
            chain_length: 3,
            honest_prefix: 2,
            attack_start: 2,
            compromise_prob: 0.3,
            dsa_success_prob: 0.2,
            honest_pmf_h1: vec![0.2, 0.3, 0.5],
            honest_pmf_h0: vec![0.6, 0.3, 0.1],
        };
        let t = CoefficientTables::build(&cfg).unwrap();
        for family in Family::ALL {
            for m in 1..4 {
                for i in (0..t.num_outcomes()).step_by(7) {
                    let got = t.coefficient(family, i, m);
                    let want = literal_coefficient(&cfg, family, i, m);
                    assert!((got - want).abs() <= 1e-15 * want.max(1.0));
                }
            }
        }
    }

    #[test]
    fn reference_tables_and_honest_mass() {
        let cfg = SystemConfig::reference(0.5, 0.0118, 3, 3);
        let t = CoefficientTables::build(&cfg).unwrap();
        assert_eq!(t.num_outcomes(), 65536);
        for family in Family::ALL {
            assert_eq!(t.family(family).num_columns(), 15);
        }
        let sp: f64 = t.psi().iter().sum();
        let st: f64 = t.theta().iter().sum();
        assert!((sp - 0.0625).abs() < 1e-12);
        assert!((st - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn fully_compromised_keeps_only_the_all_ones_pattern() {
        let cfg = SystemConfig::reference(1.0, 0.0118, 3, 3);
        let t = CoefficientTables::build(&cfg).unwrap();
        assert!(t.psi().iter().all(|&v| v == 0.0));
        assert!(t.theta().iter().all(|&v| v == 0.0));
        for family in Family::ALL {
            let pats: Vec<u64> = t.family(family).patterns().iter().map(|p| p.index()).collect();
            assert_eq!(pats, vec![15]);
        }
    }

    #[test]
    fn extreme_dsa_probabilities_empty_a_branch() {
        let t = CoefficientTables::build(&SystemConfig::reference(0.5, 0.0, 3, 3)).unwrap();
        assert_eq!(t.family(Family::P1).num_columns(), 0);
        assert_eq!(t.family(Family::Q1).num_columns(), 0);
        assert_eq!(t.family(Family::P2).num_columns(), 15);
        let t = CoefficientTables::build(&SystemConfig::reference(0.5, 1.0, 3, 3)).unwrap();
        assert_eq!(t.family(Family::P2).num_columns(), 0);
        assert_eq!(t.family(Family::Q2).num_columns(), 0);
    }

    #[test]
    fn pattern_weights_sum_to_attack_probability() {
        let cfg = SystemConfig::reference(0.37, 0.0118, 3, 3);
        let t = CoefficientTables::build(&cfg).unwrap();
        let total: f64 = DevicePattern::all(4)
            .map(|p| cfg.pattern_weight(p.malicious_count()))
            .sum();
        assert!((total - (1.0 - 0.63f64.powi(4))).abs() < 1e-14);
        // Budgets of the two branches add back to the pattern weight.
        for (k, p) in t.family(Family::P1).patterns().iter().enumerate() {
            let b = t.family(Family::P1).budgets()[k] + t.family(Family::P2).budgets()[k];
            assert!((b - cfg.pattern_weight(p.malicious_count())).abs() < 1e-15);
        }
    }

    #[test]
    fn coefficients_are_positive_on_active_sets() {
        let cfg = SystemConfig::reference(0.8, 0.3, 2, 1);
        let t = CoefficientTables::build(&cfg).unwrap();
        for table in t.families() {
            for k in 0..table.num_columns() {
                assert!(table.column(k).iter().all(|&c| c > 0.0));
            }
        }
    }

    #[test]
    fn symbol_counts() {
        let cfg = SystemConfig::reference(0.5, 0.1, 3, 2);
        let t = CoefficientTables::build(&cfg).unwrap();
        // Outcome with device 2 sequence (1,0,1,1): slots 2..=4 hold 0,1,1.
        let i = 0b1011 << 8;
        assert_eq!(t.attack_count(i, 2, 0), 1);
        assert_eq!(t.attack_count(i, 2, 1), 2);
        assert_eq!(t.tail_count(i, 2, 1), 1);
        assert_eq!(t.tail_count(i, 2, 0), 0);
        assert_eq!(t.attack_count(i, 1, 0), 3);
    }

    #[test]
    fn outcome_cap_is_enforced() {
        let mut cfg = SystemConfig::reference(0.5, 0.1, 3, 2);
        cfg.chain_length = 7;
        cfg.num_devices = 4;
        let limits = TableLimits {
            max_outcomes: 1 << 24,
            ..TableLimits::default()
        };
        assert!(matches!(
            CoefficientTables::build_with_limits(&cfg, limits),
            Err(ModelError::OutcomeSpaceTooLarge { .. })
        ));
    }
}
