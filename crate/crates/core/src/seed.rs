//! Counter-based random streams.
//!
//! Every stream is a ChaCha12 generator keyed by the master seed (expanded
//! by `seed_from_u64`) with stream number `(kind << 56) ^ index`. Streams for
//! different kinds or indices never overlap, and any stream can be created
//! directly without generating the ones before it.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamKind {
    /// Patient thresholds; shared by every design on the same run.
    Thresholds = 1,
    /// Randomization inside a design.
    DesignDraws = 2,
    Scenarios = 3,
    Permutation = 4,
}

pub fn stream(master: u64, kind: StreamKind, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master);
    rng.set_stream(((kind as u64) << 56) ^ index);
    rng
}
