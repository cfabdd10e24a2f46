//! Seed plumbing.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] keyed by a
//! 64-bit seed and a [`Substream`] selector. ChaCha exposes a 64-bit stream
//! id next to its key, so two substreams of one seed are independent
//! keystreams rather than offsets into the same one. Seeds for experiment
//! cells are derived with [`derive_seed`], a splitmix64 fold over the cell
//! coordinates, which makes a cell's randomness independent of the order in
//! which cells are executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named keystreams carved out of one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Substream {
    Raw = 0,
    TrainSymbols = 1,
    TestSymbols = 2,
    TrainNoise = 3,
    TestNoise = 4,
    Init = 5,
    Batches = 6,
}

pub fn substream(seed: u64, which: Substream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into `base` one word at a time.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}
