//! Deterministic random-number streams.
//!
//! Every replication, subject map, and per-voxel assignment owns its own
//! stream, derived purely from (seed, stream id). Identical parameters
//! give identical draw sequences on every run and thread schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Concrete generator type behind a stream.
pub type StreamRng = ChaCha8Rng;

/// A reproducible random stream identified by (seed, stream_id).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Instantiates the generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// `count` i.i.d. standard normal draws from the given stream.
pub fn rng_standard_normal(stream: &RngStream, count: usize) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..count)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect()
}
