//! Deterministic derivation of independent RNG streams.
//!
//! Every stochastic stage draws from its own stream derived from a master
//! seed, a stage tag, and an index. Streams can be split per query or per
//! session so that work scheduled concurrently still reproduces bit-for-bit.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags for the stochastic stages of an experiment.
pub mod stream {
    pub const SYNTHETIC_WEIGHTS: u64 = 0x01;
    pub const SYNTHETIC_DOCS: u64 = 0x02;
    pub const INITIAL_RANKER: u64 = 0x03;
    pub const RANDOMIZATION: u64 = 0x04;
    pub const TRAINING: u64 = 0x05;
    pub const CLICK_LOG: u64 = 0x06;
    pub const SIGNIFICANCE: u64 = 0x07;
    pub const MODEL_INIT: u64 = 0x08;
    pub const SUBSET: u64 = 0x09;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a sub-seed for a stage that seeds its own generator.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    let mut state = seed
        ^ tag.wrapping_mul(0xA076_1D64_78BD_642F)
        ^ index.wrapping_mul(0xE703_7ED1_A0B4_28DB);
    splitmix64(&mut state)
}

/// Derive an independent ChaCha stream from `(seed, tag, index)`.
///
/// The mapping is stable: equal inputs always produce the same stream, and
/// distinct `(tag, index)` pairs produce statistically independent streams.
pub fn derive_rng(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut state = seed
        ^ tag.wrapping_mul(0xA076_1D64_78BD_642F)
        ^ index.wrapping_mul(0xE703_7ED1_A0B4_28DB);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
