//! Counter-based random draws keyed by `(seed, cycle, row, column)`.
//!
//! There is no sequential generator state: every draw is a pure function of
//! its key, so the outcome of any stochastic switch is independent of the
//! order (or thread) in which synapses are visited. Resuming a simulation only
//! requires the seed and the cycle counter.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const CYCLE_MUL: u64 = 0xd1b5_4a32_d192_ed03;
const ROW_MUL: u64 = 0xabc9_8388_fb8f_ac03;
const COL_MUL: u64 = 0x8cb9_2ba7_2f3d_8dd7;

/// SplitMix64 finalizer; a bijection on `u64` with full avalanche.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Identity of one draw inside a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub cycle: u64,
    pub row: u64,
    pub col: u64,
}

impl StreamId {
    pub fn new(cycle: u64, row: usize, col: usize) -> Self {
        Self {
            cycle,
            row: row as u64,
            col: col as u64,
        }
    }
}

/// Keyed counter-based generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    seed: u64,
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            key: mix64(seed ^ GOLDEN),
        }
    }

    /// Independent stream for a different purpose (initialization vs learning).
    pub fn derive(&self, salt: u64) -> Self {
        Self {
            seed: self.seed,
            key: mix64(self.key ^ mix64(salt.wrapping_add(GOLDEN))),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn bits(&self, id: StreamId) -> u64 {
        let mut h = mix64(self.key ^ id.cycle.wrapping_mul(CYCLE_MUL));
        h = mix64(h ^ id.row.wrapping_mul(ROW_MUL));
        mix64(h ^ id.col.wrapping_mul(COL_MUL))
    }

    /// Uniform draw in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&self, id: StreamId) -> f64 {
        (self.bits(id) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `true` with probability `p`. `p >= 1` always succeeds, `p <= 0` never does.
    #[inline]
    pub fn bernoulli(&self, id: StreamId, p: f64) -> bool {
        self.uniform(id) < p
    }
}
