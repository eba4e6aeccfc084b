//! Schedule-independent random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream addressed by a
//! `(seed, stream)` pair, so a block of a matrix or a Monte Carlo
//! replication can be generated on any thread in any order and still
//! produce the same bits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Width of the column blocks used by the matrix generators. Each block
/// owns one ChaCha stream.
pub const COLUMN_BLOCK: usize = 64;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `index` under `master`. Keyed two-round mix, so
/// neighbouring indices and neighbouring master seeds give unrelated
/// children.
pub fn child_seed(master: u64, index: u64) -> u64 {
    let keyed = mix64(master.wrapping_add(GOLDEN));
    mix64(keyed ^ mix64(index.wrapping_mul(GOLDEN).wrapping_add(1)))
}

/// Generator for stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
