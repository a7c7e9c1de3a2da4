//! Bit-packed crossbar of binary synapses.
//!
//! Row `j` holds the synapses feeding output neuron `j`. Bit `c` of a row is 1
//! when the junction in column `c` is `Parallel`. Rows are padded to whole
//! 64-bit words; padding bits are always zero.

use crate::device::MtjState;
use crate::error::SimError;
use crate::rng::{mix64, CounterRng, StreamId};

#[inline]
pub fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

/// Pack a boolean slice into little-endian bit order (bit `i` of word `i / 64`).
pub fn pack_bools(values: &[bool]) -> Vec<u64> {
    let mut words = vec![0u64; words_for(values.len())];
    for (i, _) in values.iter().enumerate().filter(|(_, &v)| v) {
        words[i / 64] |= 1u64 << (i % 64);
    }
    words
}

pub fn unpack_bools(words: &[u64], len: usize) -> Vec<bool> {
    (0..len).map(|i| get_bit(words, i)).collect()
}

#[inline]
pub fn get_bit(words: &[u64], i: usize) -> bool {
    (words[i / 64] >> (i % 64)) & 1 == 1
}

#[inline]
pub fn set_bit(words: &mut [u64], i: usize, value: bool) {
    let mask = 1u64 << (i % 64);
    if value {
        words[i / 64] |= mask;
    } else {
        words[i / 64] &= !mask;
    }
}

#[inline]
pub fn popcount(words: &[u64]) -> u32 {
    words.iter().map(|w| w.count_ones()).sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynapseArray {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl SynapseArray {
    pub fn new(rows: usize, cols: usize, fill: MtjState) -> Result<Self, SimError> {
        if rows == 0 || cols == 0 {
            return Err(SimError::ZeroDimension { rows, cols });
        }
        let words_per_row = words_for(cols);
        let mut array = Self {
            rows,
            cols,
            words_per_row,
            bits: vec![0; rows * words_per_row],
        };
        if fill.is_parallel() {
            array.bits.fill(u64::MAX);
            array.clear_padding();
        }
        Ok(array)
    }

    /// Every cell independently `Parallel` with probability `p_parallel`,
    /// drawn at identity `(0, row, col)` of `rng`.
    pub fn random(
        rows: usize,
        cols: usize,
        p_parallel: f64,
        rng: &CounterRng,
    ) -> Result<Self, SimError> {
        let mut array = Self::new(rows, cols, MtjState::AntiParallel)?;
        for row in 0..rows {
            let words = array.row_words_mut(row);
            for col in 0..cols {
                if rng.bernoulli(StreamId::new(0, row, col), p_parallel) {
                    words[col / 64] |= 1u64 << (col % 64);
                }
            }
        }
        Ok(array)
    }

    /// Rebuild from raw packed words, rejecting inconsistent sizes or set padding bits.
    pub fn from_words(rows: usize, cols: usize, bits: Vec<u64>) -> Result<Self, SimError> {
        if rows == 0 || cols == 0 {
            return Err(SimError::ZeroDimension { rows, cols });
        }
        let words_per_row = words_for(cols);
        if bits.len() != rows * words_per_row {
            return Err(SimError::InvalidConfig(format!(
                "expected {} packed words for a {rows}x{cols} crossbar, got {}",
                rows * words_per_row,
                bits.len()
            )));
        }
        let array = Self {
            rows,
            cols,
            words_per_row,
            bits,
        };
        let pad = array.padding_mask();
        if pad != 0 && (0..rows).any(|r| array.row_words(r)[words_per_row - 1] & pad != 0) {
            return Err(SimError::InvalidConfig(
                "padding bits beyond the last column are set".into(),
            ));
        }
        Ok(array)
    }

    #[inline]
    fn padding_mask(&self) -> u64 {
        match self.cols % 64 {
            0 => 0,
            used => !((1u64 << used) - 1),
        }
    }

    fn clear_padding(&mut self) {
        let pad = self.padding_mask();
        if pad == 0 {
            return;
        }
        let wpr = self.words_per_row;
        for row in 0..self.rows {
            self.bits[row * wpr + wpr - 1] &= !pad;
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    pub fn words(&self) -> &[u64] {
        &self.bits
    }

    #[inline]
    pub fn row_words(&self, row: usize) -> &[u64] {
        &self.bits[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    #[inline]
    pub fn row_words_mut(&mut self, row: usize) -> &mut [u64] {
        &mut self.bits[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> MtjState {
        debug_assert!(row < self.rows && col < self.cols);
        MtjState::from_bit(get_bit(self.row_words(row), col))
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, state: MtjState) {
        debug_assert!(row < self.rows && col < self.cols);
        set_bit(self.row_words_mut(row), col, state.is_parallel());
    }

    pub fn row_states(&self, row: usize) -> Vec<MtjState> {
        (0..self.cols).map(|c| self.get(row, c)).collect()
    }

    /// Number of `Parallel` cells in the row that are also set in `mask`.
    #[inline]
    pub fn overlap(&self, row: usize, mask: &[u64]) -> u32 {
        self.row_words(row)
            .iter()
            .zip(mask)
            .map(|(w, m)| (w & m).count_ones())
            .sum()
    }

    pub fn row_parallel_count(&self, row: usize) -> usize {
        popcount(self.row_words(row)) as usize
    }

    pub fn parallel_count(&self) -> usize {
        popcount(&self.bits) as usize
    }

    pub fn parallel_fraction(&self) -> f64 {
        self.parallel_count() as f64 / (self.rows * self.cols) as f64
    }

    /// Order-sensitive 64-bit digest of the whole state matrix.
    pub fn fingerprint(&self) -> u64 {
        let mut h = mix64((self.rows as u64) << 32 ^ self.cols as u64);
        for &w in &self.bits {
            h = mix64(h ^ w);
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_roundtrip_across_word_boundary() {
        let values: Vec<bool> = (0..130).map(|i| i % 3 == 0).collect();
        let words = pack_bools(&values);
        assert_eq!(words.len(), 3);
        assert_eq!(unpack_bools(&words, 130), values);
    }

    #[test]
    fn parallel_fill_leaves_padding_clear() {
        let a = SynapseArray::new(3, 70, MtjState::Parallel).unwrap();
        assert_eq!(a.words_per_row(), 2);
        assert_eq!(a.parallel_count(), 210);
        assert_eq!(a.row_words(1)[1], (1u64 << 6) - 1);
    }

    #[test]
    fn get_set() {
        let mut a = SynapseArray::new(2, 100, MtjState::AntiParallel).unwrap();
        a.set(1, 99, MtjState::Parallel);
        a.set(0, 64, MtjState::Parallel);
        assert_eq!(a.get(1, 99), MtjState::Parallel);
        assert_eq!(a.get(0, 64), MtjState::Parallel);
        assert_eq!(a.get(0, 63), MtjState::AntiParallel);
        assert_eq!(a.row_parallel_count(0), 1);
        a.set(1, 99, MtjState::AntiParallel);
        assert_eq!(a.row_parallel_count(1), 0);
    }

    #[test]
    fn overlap_counts_masked_parallel_cells() {
        let mut a = SynapseArray::new(1, 8, MtjState::AntiParallel).unwrap();
        for c in [0, 2, 5] {
            a.set(0, c, MtjState::Parallel);
        }
        let mask = pack_bools(&[true, true, true, false, false, true, true, true]);
        assert_eq!(a.overlap(0, &mask), 3);
        let mask = pack_bools(&[false, true, false, true, false, false, true, true]);
        assert_eq!(a.overlap(0, &mask), 0);
    }

    #[test]
    fn from_words_validates() {
        assert!(SynapseArray::from_words(2, 10, vec![0; 2]).is_ok());
        assert!(SynapseArray::from_words(2, 10, vec![0; 3]).is_err());
        assert!(SynapseArray::from_words(1, 10, vec![1 << 12]).is_err());
        assert!(SynapseArray::from_words(0, 10, vec![]).is_err());
    }

    #[test]
    fn fingerprint_tracks_changes() {
        let mut a = SynapseArray::new(4, 40, MtjState::AntiParallel).unwrap();
        let before = a.fingerprint();
        a.set(3, 39, MtjState::Parallel);
        assert_ne!(before, a.fingerprint());
        a.set(3, 39, MtjState::AntiParallel);
        assert_eq!(before, a.fingerprint());
    }
}
