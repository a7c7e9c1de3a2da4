//! Simplified STDP learning block.
//!
//! The block remembers which input columns received a pulse since the last
//! firing. When a neuron fires, every synapse in its row is potentiated if its
//! pixel was seen and depressed otherwise. Each of the `r` copies of a pixel
//! gets the same pulse but switches with an independent draw.

use crate::crossbar::{get_bit, pack_bools, unpack_bools, words_for, SynapseArray};
use crate::device::{stochastic_switch, DeviceConfig, Pulse};
use crate::error::SimError;
use crate::rng::{CounterRng, StreamId};

/// Packed "input seen since previous firing" memory, one bit per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputTrace {
    input_dim: usize,
    seen: Vec<u64>,
}

impl InputTrace {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            seen: vec![0; words_for(input_dim)],
        }
    }

    pub fn from_words(input_dim: usize, seen: Vec<u64>) -> Result<Self, SimError> {
        if seen.len() != words_for(input_dim) {
            return Err(SimError::DimensionMismatch {
                expected: words_for(input_dim),
                got: seen.len(),
            });
        }
        Ok(Self { input_dim, seen })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn words(&self) -> &[u64] {
        &self.seen
    }

    pub fn seen(&self) -> Vec<bool> {
        unpack_bools(&self.seen, self.input_dim)
    }

    pub fn is_clear(&self) -> bool {
        self.seen.iter().all(|&w| w == 0)
    }

    /// `seen |= input`, element-wise.
    pub fn record_input(&mut self, input: &[bool]) -> Result<(), SimError> {
        if input.len() != self.input_dim {
            return Err(SimError::DimensionMismatch {
                expected: self.input_dim,
                got: input.len(),
            });
        }
        self.record_packed(&pack_bools(input));
        Ok(())
    }

    /// Packed variant; `words` must already have the trace's word count.
    #[inline]
    pub(crate) fn record_packed(&mut self, words: &[u64]) {
        debug_assert_eq!(words.len(), self.seen.len());
        for (s, w) in self.seen.iter_mut().zip(words) {
            *s |= w;
        }
    }

    pub fn clear(&mut self) {
        self.seen.fill(0);
    }

    /// Potentiate where an input was seen, depress elsewhere.
    pub fn generate_learning_signal(&self) -> Vec<Pulse> {
        (0..self.input_dim)
            .map(|k| {
                if get_bit(&self.seen, k) {
                    Pulse::Potentiate
                } else {
                    Pulse::Depress
                }
            })
            .collect()
    }
}

/// Apply one pulse per pixel to every copy of that pixel in `fired_row`.
///
/// Synapse `(row, k * r + c)` draws at identity `(cycle, row, k * r + c)`.
pub fn apply_learning(
    array: &mut SynapseArray,
    fired_row: usize,
    pulses: &[Pulse],
    cfg: &DeviceConfig,
    rng: &CounterRng,
    cycle: u64,
) -> Result<(), SimError> {
    if fired_row >= array.rows() {
        return Err(SimError::RowOutOfRange {
            row: fired_row,
            rows: array.rows(),
        });
    }
    if pulses.is_empty() || !array.cols().is_multiple_of(pulses.len()) {
        return Err(SimError::DimensionMismatch {
            expected: array.cols(),
            got: pulses.len(),
        });
    }
    let r = array.cols() / pulses.len();
    for (k, &pulse) in pulses.iter().enumerate() {
        for col in k * r..(k + 1) * r {
            let state = array.get(fired_row, col);
            let next = stochastic_switch(state, pulse, cfg, rng, StreamId::new(cycle, fired_row, col));
            if next != state {
                array.set(fired_row, col, next);
            }
        }
    }
    Ok(())
}

/// Word-level equivalent of [`apply_learning`] driven by an expanded
/// (`cols`-wide) potentiation mask. Produces identical states.
pub(crate) fn apply_learning_packed(
    array: &mut SynapseArray,
    fired_row: usize,
    potentiate: &[u64],
    cfg: &DeviceConfig,
    rng: &CounterRng,
    cycle: u64,
) {
    let cols = array.cols();
    let words = array.row_words_mut(fired_row);
    for (w, (word, &pot)) in words.iter_mut().zip(potentiate).enumerate() {
        let base = w * 64;
        let valid = if base + 64 <= cols {
            u64::MAX
        } else {
            (1u64 << (cols - base)) - 1
        };
        // AP cells receiving potentiation, P cells receiving depression
        let up = !*word & pot & valid;
        let down = *word & !pot & valid;
        let mut flips = 0u64;
        for (mut candidates, p) in [(up, cfg.p_pot), (down, cfg.p_dep)] {
            if p <= 0.0 {
                continue;
            }
            while candidates != 0 {
                let bit = candidates.trailing_zeros() as usize;
                candidates &= candidates - 1;
                if rng.bernoulli(StreamId::new(cycle, fired_row, base + bit), p) {
                    flips |= 1u64 << bit;
                }
            }
        }
        *word ^= flips;
    }
}
