//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream derived from a
//! user seed and a fixed stream id, so adding a draw in one place never
//! shifts the numbers another place sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const STREAM_GENERATOR: u64 = 1;
pub(crate) const STREAM_SPLIT: u64 = 2;
pub(crate) const STREAM_TRAIN: u64 = 3;
pub(crate) const STREAM_RANDOM_PROJECTION: u64 = 4;
pub(crate) const STREAM_DROPOUT: u64 = 5;
pub(crate) const STREAM_INLP_DEV: u64 = 6;

pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
