//! Keyed random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream addressed
//! by `(seed, domain path, index)`. ChaCha is counter based, so the stream for
//! row 17 of layer 3 is the same whether it is generated first, last, or on
//! another thread. This is what makes Monte Carlo estimates bit-identical for
//! any rayon pool size.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags separating independent uses of one master seed.
pub mod domain {
    pub const WEIGHTS: u64 = 0x5745_4947_4854_5300;
    pub const INPUT_PAIR: u64 = 0x5041_4952_0000_0000;
    pub const INPUTS: u64 = 0x494e_5055_5453_0000;
    pub const ORACLE: u64 = 0x4f52_4143_4c45_0000;
    pub const CELL: u64 = 0x4345_4c4c_0000_0000;
    pub const SYNTHETIC: u64 = 0x5359_4e54_4800_0000;
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a path of integers into a new 64-bit seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut state = seed;
    let mut out = splitmix64(&mut state);
    for &p in path {
        state = out ^ p.wrapping_mul(0xD6E8_FEB8_6659_FD93);
        out = splitmix64(&mut state);
    }
    out
}

/// A family of independent streams sharing one key, indexed by `u64`.
#[derive(Debug, Clone)]
pub struct Substreams {
    key: [u8; 32],
}

impl Substreams {
    pub fn new(seed: u64, path: &[u64]) -> Self {
        let mut state = derive_seed(seed, path);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        Substreams { key }
    }

    /// Stream number `index`; independent of every other index.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }
}
