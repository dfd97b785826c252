//! Device compromise patterns.
//!
//! Pattern `m` in `1..2^N` is read as an `N`-bit string whose first digit
//! (the most significant bit) describes device 1. A set bit marks the device
//! as malicious.

use crate::error::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DevicePattern {
    m: u64,
    num_devices: usize,
}

impl DevicePattern {
    pub fn new(m: u64, num_devices: usize) -> Result<Self, ModelError> {
        if num_devices == 0 || num_devices > 63 || m == 0 || m >= (1u64 << num_devices) {
            return Err(ModelError::PatternOutOfRange { m, num_devices });
        }
        Ok(Self { m, num_devices })
    }

    /// Every non-trivial pattern `1..2^N` in increasing order.
    pub fn all(num_devices: usize) -> impl Iterator<Item = DevicePattern> {
        (1..(1u64 << num_devices)).map(move |m| DevicePattern { m, num_devices })
    }

    pub fn index(&self) -> u64 {
        self.m
    }

    pub fn num_devices(&self) -> usize {
        self.num_devices
    }

    /// Number of malicious devices, `n_m`.
    pub fn malicious_count(&self) -> usize {
        self.m.count_ones() as usize
    }

    /// `S_m(j)` for 1-based device `j`.
    pub fn is_malicious(&self, device: usize) -> bool {
        debug_assert!((1..=self.num_devices).contains(&device));
        (self.m >> (self.num_devices - device)) & 1 == 1
    }

    /// The bit string `S_m`, device 1 first.
    pub fn bits(&self) -> Vec<bool> {
        (1..=self.num_devices).map(|j| self.is_malicious(j)).collect()
    }
}

/// Returns `(n_m, S_m)` for pattern `m` over `num_devices` devices.
pub fn count_malicious(m: u64, num_devices: usize) -> Result<(usize, Vec<bool>), ModelError> {
    let pattern = DevicePattern::new(m, num_devices)?;
    Ok((pattern.malicious_count(), pattern.bits()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowest_pattern_marks_last_device() {
        let (n, bits) = count_malicious(1, 3).unwrap();
        assert_eq!(n, 1);
        assert_eq!(bits, vec![false, false, true]);
    }

    #[test]
    fn all_ones_pattern() {
        for n in 1..8 {
            let (count, bits) = count_malicious((1 << n) - 1, n).unwrap();
            assert_eq!(count, n);
            assert!(bits.iter().all(|&b| b));
        }
    }

    #[test]
    fn most_significant_bit_is_device_one() {
        let (n, bits) = count_malicious(4, 3).unwrap();
        assert_eq!(n, 1);
        assert_eq!(bits, vec![true, false, false]);
    }

    #[test]
    fn out_of_range() {
        assert!(count_malicious(0, 3).is_err());
        assert!(count_malicious(8, 3).is_err());
        assert!(count_malicious(1, 0).is_err());
    }

    #[test]
    fn enumeration_covers_all_patterns() {
        let all: Vec<_> = DevicePattern::all(4).map(|p| p.index()).collect();
        assert_eq!(all, (1..16).collect::<Vec<_>>());
    }
}
