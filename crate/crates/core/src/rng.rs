//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed; the stream
//! id selects an independent keystream, so adding workers never perturbs the
//! draws of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const TIMELINE_STREAM: u64 = u64::MAX;
const AUX_STREAM: u64 = u64::MAX - 1;

/// Gradient-noise stream of worker `worker` (0-based).
pub fn worker_stream(seed: u64, worker: usize) -> StreamRng {
    stream(seed, worker as u64)
}

/// Stream used by the wall-clock simulator.
pub fn timeline_stream(seed: u64) -> StreamRng {
    stream(seed, TIMELINE_STREAM)
}

/// Stream for one-off sampling tasks such as synthetic data generation.
pub fn auxiliary_stream(seed: u64) -> StreamRng {
    stream(seed, AUX_STREAM)
}

fn stream(seed: u64, id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
