use thiserror::Error;

/// Errors raised while validating a scenario or building its tables.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("compromise probability must satisfy 0 < alpha <= 1, got {0}")]
    CompromiseProb(f64),
    #[error("DSA success probability must lie in [0, 1], got {0}")]
    DsaSuccessProb(f64),
    #[error("block indices must satisfy L_A <= L_0 < L, got L_A={attack_start}, L_0={honest_prefix}, L={chain_length}")]
    BlockOrder {
        attack_start: usize,
        honest_prefix: usize,
        chain_length: usize,
    },
    #[error("L_A = 0 is only allowed together with L_0 = 0 (got L_0={0})")]
    ZeroAttackStart(usize),
    #[error("{what} must be at least {min}, got {got}")]
    TooSmall {
        what: &'static str,
        min: usize,
        got: usize,
    },
    #[error("{name} has length {got}, expected alphabet size {expected}")]
    PmfLength {
        name: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("{name} entry {index} = {value} is not strictly positive")]
    PmfNotPositive {
        name: &'static str,
        index: usize,
        value: f64,
    },
    #[error("{name} entry {index} = {value} is outside [0, 1]")]
    PmfOutOfRange {
        name: &'static str,
        index: usize,
        value: f64,
    },
    #[error("{name} sums to {sum}, not 1")]
    PmfNotNormalized { name: &'static str, sum: f64 },
    #[error("outcome space |K|^(N*L) = {size} exceeds the cap {cap}")]
    OutcomeSpaceTooLarge { size: u128, cap: u128 },
    #[error("coefficient tables need {entries} entries, above the limit {limit}")]
    TablesTooLarge { entries: u128, limit: u128 },
    #[error("pattern index {m} out of range [1, 2^{num_devices} - 1]")]
    PatternOutOfRange { m: u64, num_devices: usize },
    #[error("outcome index {index} out of range for {count} outcomes")]
    OutcomeOutOfRange { index: usize, count: usize },
}
