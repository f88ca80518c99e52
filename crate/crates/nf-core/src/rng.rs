//! Reproducible random streams derived from `(seed, stream id)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream drives; occupies the top byte of the stream id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamKind {
    Initial = 1,
    Private = 2,
    Shared = 3,
    Placement = 4,
    Sampling = 5,
}

/// Stream id for `(kind, neuron, source population)`.
pub fn stream_id(kind: StreamKind, neuron: u64, source: u64) -> u64 {
    debug_assert!(neuron < 1 << 40 && source < 1 << 16);
    ((kind as u64) << 56) | (neuron << 16) | source
}

/// ChaCha8 keyed by `seed`, positioned on stream `id`.
pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
