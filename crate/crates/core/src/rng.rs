//! Seeded random streams.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`), a
//! counter-based generator. A run seed is expanded with
//! `ChaCha8Rng::seed_from_u64(seed)` and each consumer gets its own ChaCha
//! stream id, so drawing more numbers in one place never shifts another.
//!
//! Permutations are Fisher–Yates from the top index down; the swap index for
//! position `i` is `(next_u64() * (i + 1)) >> 64` (128-bit multiply-shift).

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream ids. Epoch shuffles use `SHUFFLE + epoch`.
pub mod stream {
    pub const SPLIT: u64 = 1;
    pub const SYNTHETIC: u64 = 2;
    pub const INIT: u64 = 3;
    pub const DROPOUT: u64 = 4;
    pub const SHUFFLE: u64 = 1 << 32;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform integer in `[0, bound)` by multiply-shift. `bound` must be > 0.
pub fn uniform_below<R: RngCore>(rng: &mut R, bound: usize) -> usize {
    debug_assert!(bound > 0);
    ((rng.next_u64() as u128 * bound as u128) >> 64) as usize
}

pub fn shuffle<T, R: RngCore>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = uniform_below(rng, i + 1);
        items.swap(i, j);
    }
}

pub fn permutation<R: RngCore>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    shuffle(&mut idx, rng);
    idx
}
