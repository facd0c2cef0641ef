//! Named random sub-streams derived from one 64-bit run seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent consumers of randomness. Each gets its own ChaCha stream so
/// that, for example, changing the shuffle order never perturbs weight init.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Sim = 1,
    Init = 2,
    Shuffle = 3,
    Sample = 4,
    Tsne = 5,
}

/// Generator for `stream` under `seed`.
pub fn rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    indexed_rng(seed, stream, 0)
}

/// Generator for the `index`-th member of `stream` (e.g. one per episode).
pub fn indexed_rng(seed: u64, stream: Stream, index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 32) | index as u64);
    rng
}
