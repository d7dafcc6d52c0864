//! Mixed-radix indexing over finite product alphabets.
//!
//! The first digit is the most significant one, so profiles enumerate in
//! row-major order (player 1's action changes slowest).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixedRadix {
    radices: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl MixedRadix {
    pub fn new(radices: Vec<usize>) -> Self {
        let mut strides = vec![1; radices.len()];
        for d in (0..radices.len().saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * radices[d + 1];
        }
        let size = radices.iter().product();
        Self {
            radices,
            strides,
            size,
        }
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Number of digits.
    pub fn len(&self) -> usize {
        self.radices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radices.is_empty()
    }

    /// Number of distinct indices, `prod radices` (1 for zero digits).
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn index(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.radices.len());
        digits
            .iter()
            .zip(&self.strides)
            .map(|(d, s)| d * s)
            .sum()
    }

    pub fn digit(&self, index: usize, position: usize) -> usize {
        (index / self.strides[position]) % self.radices[position]
    }

    pub fn digits(&self, index: usize) -> Vec<usize> {
        (0..self.radices.len())
            .map(|d| self.digit(index, d))
            .collect()
    }

    pub fn digits_into(&self, index: usize, out: &mut [usize]) {
        for (d, slot) in out.iter_mut().enumerate() {
            *slot = self.digit(index, d);
        }
    }
}
