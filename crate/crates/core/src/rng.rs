//! Keyed random streams.
//!
//! Every random draw in the crate comes from a [`SimRng`] derived from a
//! [`StreamKey`]. The key is injected verbatim into the ChaCha key and stream
//! words, so distinct keys give distinct, independent streams and the same key
//! always reproduces the same stream regardless of thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every sampling procedure.
pub type SimRng = ChaCha8Rng;

/// What a stream is used for. Part of the key so that, e.g., observation noise
/// and SMC proposals never share randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Simulate = 1,
    Noise = 2,
    Propagate = 3,
    Resample = 4,
    Optimizer = 5,
    Window = 6,
    Replicate = 7,
    Test = 99,
}

/// Coordinates of an independent random stream.
///
/// `index` separates replicates (or θ candidates when common random numbers
/// are not wanted); `step` separates time steps; `lane` separates chunks
/// within a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub purpose: Purpose,
    pub index: u64,
    pub step: u64,
    pub lane: u64,
}

/// Words reserved per lane; a lane must not consume more than this many
/// 32-bit outputs.
const LANE_WORDS: u128 = 1 << 48;

impl StreamKey {
    pub fn new(seed: u64, purpose: Purpose) -> Self {
        StreamKey {
            seed,
            purpose,
            index: 0,
            step: 0,
            lane: 0,
        }
    }

    pub fn index(mut self, index: u64) -> Self {
        self.index = index;
        self
    }

    pub fn step(mut self, step: u64) -> Self {
        self.step = step;
        self
    }

    pub fn lane(mut self, lane: u64) -> Self {
        self.lane = lane;
        self
    }

    /// Derive a seed for a nested procedure (e.g. the SMC run inside an
    /// estimator replicate).
    pub fn derive_seed(&self) -> u64 {
        let mut rng = self.rng();
        rand::RngCore::next_u64(&mut rng)
    }

    pub fn rng(&self) -> SimRng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&(self.purpose as u64).to_le_bytes());
        key[16..24].copy_from_slice(&self.index.to_le_bytes());
        key[24..32].copy_from_slice(&0x6162_632d_686d_6d00u64.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.step);
        rng.set_word_pos(u128::from(self.lane) * LANE_WORDS);
        rng
    }
}
