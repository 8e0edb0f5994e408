//! Deterministic random substreams.
//!
//! A [`StreamKey`] is derived from a user seed and any number of labels
//! (draw id, grid cell, ...). Each simulation unit (a path, or an antithetic
//! pair) reads its own ChaCha stream selected by the unit index, so the
//! numbers a unit sees do not depend on how units are split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey([u64; 4]);

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        let mut state = seed;
        Self([
            splitmix64(&mut state),
            splitmix64(&mut state),
            splitmix64(&mut state),
            splitmix64(&mut state),
        ])
    }

    /// Child key for a label; distinct labels give unrelated keys.
    pub fn derive(&self, label: u64) -> Self {
        let mut state = self.0[0] ^ label.rotate_left(17);
        let mut out = [0u64; 4];
        for (i, word) in out.iter_mut().enumerate() {
            state ^= self.0[i];
            *word = splitmix64(&mut state);
        }
        out[3] ^= label;
        Self(out)
    }

    /// Generator for simulation unit `index`.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut bytes = [0u8; 32];
        for (chunk, word) in bytes.chunks_exact_mut(8).zip(self.0) {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(bytes);
        rng.set_stream(index);
        rng
    }
}
