//! Seeded linear hash modulo the Mersenne prime `2^61 - 1`, used to realize
//! the random assignment of sequences to bins.

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::seed::derive;

pub const MERSENNE_61: u64 = (1 << 61) - 1;

fn mul_mod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % MERSENNE_61 as u128) as u64
}

/// Hash family for one `(deviator, action, segment length)` class.
///
/// Word `w` is `sum_t r[w][t] * (x_t + 1) mod p`; the words are combined as
/// base-`p` digits and reduced modulo the bin count.
#[derive(Debug, Clone)]
pub struct SegmentHash {
    keys: Vec<Vec<u64>>,
    bins: BigUint,
    bins_small: Option<u128>,
}

impl SegmentHash {
    pub fn new(seed: u64, deviator: usize, action: usize, len: usize, bins: BigUint) -> Self {
        let words = ((bins.bits() as usize + 30) / 61).max(1);
        let keys = (0..words)
            .map(|w| {
                (0..len)
                    .map(|t| {
                        let parts = [seed, deviator as u64, action as u64, len as u64, w as u64, t as u64];
                        derive(&parts) % MERSENNE_61
                    })
                    .collect()
            })
            .collect();
        let bins_small = if words <= 2 { bins.to_u128() } else { None };
        Self {
            keys,
            bins,
            bins_small,
        }
    }

    pub fn bins(&self) -> &BigUint {
        &self.bins
    }

    pub fn words(&self) -> usize {
        self.keys.len()
    }

    /// Per-word accumulators for a sequence of symbols.
    pub fn state(&self, symbols: &[usize]) -> Vec<u64> {
        self.keys
            .iter()
            .map(|k| {
                symbols
                    .iter()
                    .zip(k)
                    .fold(0u64, |acc, (&x, &r)| (acc + mul_mod(r, x as u64 + 1)) % MERSENNE_61)
            })
            .collect()
    }

    /// Updates `state` after stage `t` changed from `old` to `new`.
    pub fn update(&self, state: &mut [u64], t: usize, old: usize, new: usize) {
        let (up, d) = if new >= old {
            (true, (new - old) as u64)
        } else {
            (false, (old - new) as u64)
        };
        for (h, k) in state.iter_mut().zip(&self.keys) {
            let delta = mul_mod(k[t], d);
            *h = if up {
                (*h + delta) % MERSENNE_61
            } else {
                (*h + MERSENNE_61 - delta) % MERSENNE_61
            };
        }
    }

    /// Bin of an accumulator state.
    pub fn bin_of_state(&self, state: &[u64]) -> BigUint {
        match self.bins_small {
            Some(b) => {
                let v = state
                    .iter()
                    .rev()
                    .fold(0u128, |acc, &h| acc * MERSENNE_61 as u128 + h as u128);
                BigUint::from(v % b)
            }
            None => {
                let p = BigUint::from(MERSENNE_61);
                let v = state
                    .iter()
                    .rev()
                    .fold(BigUint::from(0u8), |acc, &h| acc * &p + h);
                v % &self.bins
            }
        }
    }

    /// Fast equality test against a known bin.
    pub fn state_in_bin(&self, state: &[u64], bin: &BigUint) -> bool {
        match (self.bins_small, bin.to_u128()) {
            (Some(b), Some(target)) => {
                let v = state
                    .iter()
                    .rev()
                    .fold(0u128, |acc, &h| acc * MERSENNE_61 as u128 + h as u128);
                v % b == target
            }
            _ => &self.bin_of_state(state) == bin,
        }
    }

    pub fn bin(&self, symbols: &[usize]) -> BigUint {
        self.bin_of_state(&self.state(symbols))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incremental_matches_direct() {
        for bins in [BigUint::from(7u32), BigUint::from(1u8) << 100u32, BigUint::from(1u8) << 200u32] {
            let h = SegmentHash::new(42, 0, 1, 6, bins);
            let mut seq = vec![0, 1, 2, 0, 1, 2];
            let mut st = h.state(&seq);
            for (t, new) in [(0, 2), (3, 1), (5, 0), (0, 0)] {
                h.update(&mut st, t, seq[t], new);
                seq[t] = new;
                assert_eq!(st, h.state(&seq));
                assert_eq!(h.bin_of_state(&st), h.bin(&seq));
                assert!(h.state_in_bin(&st, &h.bin(&seq)));
            }
        }
    }

    #[test]
    fn roughly_uniform() {
        let h = SegmentHash::new(1, 0, 0, 10, BigUint::from(4u8));
        let mut hist = [0usize; 4];
        for mask in 0..1024usize {
            let s: Vec<usize> = (0..10).map(|b| mask >> b & 1).collect();
            let b = h.bin(&s).to_usize().unwrap();
            hist[b] += 1;
        }
        for c in hist {
            assert!((200..=312).contains(&c), "{hist:?}");
        }
    }
}
