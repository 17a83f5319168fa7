//! Seeded random streams.
//!
//! Every stochastic routine in the crate takes its generator as an argument.
//! Replications get independent streams of a single ChaCha8 key, so a run is
//! fully determined by `(seed, stream)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used by chains and the experiment harness.
pub type SimRng = ChaCha8Rng;

/// Identifies the random stream a chain was run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedRecord {
    pub seed: u64,
    pub stream: u64,
}

impl SeedRecord {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> SimRng {
        stream_rng(self.seed, self.stream)
    }
}

/// Builds the generator for stream `stream` under key `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
