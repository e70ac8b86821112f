//! Seeded random streams.
//!
//! Every stochastic routine takes its generator explicitly. Independent
//! trajectories, chains and forecast members each get their own ChaCha
//! stream derived from a `(seed, stream)` pair, so parallel runs stay
//! reproducible regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Generator for substream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
