//! Seeded random streams.
//!
//! Every stochastic component draws from a [`SimRng`] derived from a master
//! seed plus a pair of stream coordinates, so that results do not depend on
//! evaluation order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Well-known stream labels used as the first coordinate of [`substream`].
pub mod stream {
    pub const INIT: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const MC: u64 = 4;
    pub const VALIDATION: u64 = 5;
    pub const PREDICT: u64 = 6;
    pub const SYNTHETIC: u64 = 7;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for coordinates `(a, b)` under `seed`.
pub fn substream(seed: u64, a: u64, b: u64) -> SimRng {
    let mut state = seed;
    let mut mix = splitmix64(&mut state);
    state ^= a.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    mix ^= splitmix64(&mut state);
    state ^= b.wrapping_mul(0xA5A3_5625_1A7E_1C6B);
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_mut(8) {
        let word = splitmix64(&mut state) ^ mix;
        chunk.copy_from_slice(&word.to_le_bytes());
        mix = mix.rotate_left(17);
    }
    ChaCha8Rng::from_seed(bytes)
}
