//! Seeded random streams.
//!
//! Every random draw in the crate comes from [`ChaCha8Rng`]. A run with seed
//! `seed` uses stream 0 of the generator keyed by `seed_from_u64(seed)`; the
//! `k`-th parallel selector copy uses stream `k` of the same key. ChaCha
//! streams are non-overlapping, so copies are independent and the layout is
//! reproducible on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SketchRng = ChaCha8Rng;

/// Generator for a single-stream run.
pub fn seeded(seed: u64) -> SketchRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for copy `copy` of a multi-copy run.
pub fn substream(seed: u64, copy: u64) -> SketchRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(copy);
    rng
}
