//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit `seed` and a stream index. The
//! stream for work unit `k` is `ChaCha8(seed)` with its stream counter set to
//! `k`, so a unit's draws do not depend on how many other units ran before it
//! or on which thread ran it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for work unit `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
