//! Seeded random streams for batched simulation.
//!
//! Every batch draws from its own ChaCha8 stream selected by
//! `(seed, batch_index)`, so results do not depend on how batches are
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Number of blocks or trains simulated per random stream.
pub const BATCH_SIZE: u64 = 1 << 14;

pub fn batch_rng(seed: u64, batch_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch_index);
    rng
}

/// Splits `n` items into `(batch_index, len)` pieces of [`BATCH_SIZE`].
pub fn batches(n: u64) -> impl Iterator<Item = (u64, u64)> + Clone {
    let count = n.div_ceil(BATCH_SIZE);
    (0..count).map(move |i| (i, BATCH_SIZE.min(n - i * BATCH_SIZE)))
}
