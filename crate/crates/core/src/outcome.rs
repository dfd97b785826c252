//! Indexing of the joint outcome space.
//!
//! Outcome `i` is the base-`|K|` integer whose digits, most significant
//! first, are `r(1)_1, ..., r(1)_L, r(2)_1, ..., r(N)_L` (device-major,
//! slot-minor). Equivalently `i = sum_j o_j * |K|^(L*(N-j))` where `o_j`
//! is device `j`'s own sequence read as a base-`|K|` number with slot 1
//! most significant.

use crate::error::ModelError;

/// Shape of the outcome space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutcomeSpace {
    pub alphabet_size: usize,
    pub num_devices: usize,
    pub chain_length: usize,
    /// `|K|^L`, the number of per-device sequences.
    pub sequences_per_device: usize,
    /// `|K|^(N*L)`.
    pub num_outcomes: usize,
}

impl OutcomeSpace {
    pub fn new(alphabet_size: usize, num_devices: usize, chain_length: usize) -> Self {
        let sequences_per_device = alphabet_size.pow(chain_length as u32);
        let num_outcomes = sequences_per_device.pow(num_devices as u32);
        Self {
            alphabet_size,
            num_devices,
            chain_length,
            sequences_per_device,
            num_outcomes,
        }
    }

    /// Device `j`'s (1-based) sequence index inside outcome `i`.
    pub fn device_sequence(&self, outcome: usize, device: usize) -> usize {
        let shift = self.num_devices - device;
        (outcome / self.sequences_per_device.pow(shift as u32)) % self.sequences_per_device
    }

    /// Symbol in 1-based `slot` of a per-device sequence.
    pub fn sequence_symbol(&self, sequence: usize, slot: usize) -> usize {
        let shift = self.chain_length - slot;
        (sequence / self.alphabet_size.pow(shift as u32)) % self.alphabet_size
    }

    /// Decodes outcome `i` into `R_i[j][l]` (0-based device and slot).
    pub fn decode(&self, outcome: usize) -> Result<Vec<Vec<usize>>, ModelError> {
        if outcome >= self.num_outcomes {
            return Err(ModelError::OutcomeOutOfRange {
                index: outcome,
                count: self.num_outcomes,
            });
        }
        let mut rest = outcome;
        let mut symbols = vec![vec![0; self.chain_length]; self.num_devices];
        for row in symbols.iter_mut().rev() {
            for cell in row.iter_mut().rev() {
                *cell = rest % self.alphabet_size;
                rest /= self.alphabet_size;
            }
        }
        Ok(symbols)
    }

    /// Inverse of [`decode`](Self::decode).
    pub fn encode(&self, symbols: &[Vec<usize>]) -> usize {
        symbols
            .iter()
            .flatten()
            .fold(0, |acc, &s| acc * self.alphabet_size + s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_is_device_major() {
        let space = OutcomeSpace::new(2, 2, 3);
        assert_eq!(space.num_outcomes, 64);
        // 0b001_100: device 1 = (0,0,1), device 2 = (1,0,0)
        let r = space.decode(0b001_100).unwrap();
        assert_eq!(r, vec![vec![0, 0, 1], vec![1, 0, 0]]);
        assert_eq!(space.device_sequence(0b001_100, 1), 0b001);
        assert_eq!(space.device_sequence(0b001_100, 2), 0b100);
        assert_eq!(space.sequence_symbol(0b100, 1), 1);
        assert_eq!(space.sequence_symbol(0b100, 3), 0);
    }

    #[test]
    fn bijection() {
        let space = OutcomeSpace::new(3, 2, 2);
        for i in 0..space.num_outcomes {
            let r = space.decode(i).unwrap();
            assert_eq!(space.encode(&r), i);
            for j in 1..=2 {
                for l in 1..=2 {
                    assert_eq!(
                        space.sequence_symbol(space.device_sequence(i, j), l),
                        r[j - 1][l - 1]
                    );
                }
            }
        }
        assert!(space.decode(space.num_outcomes).is_err());
    }
}
