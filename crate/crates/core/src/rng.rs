//! Seed-derived random streams.
//!
//! Every simulated unit of work (a trajectory, a bootstrap replicate, a
//! limit-law draw) runs on its own ChaCha stream derived from the master
//! seed and a label path. Units can then be scheduled in any order, or in
//! parallel, without changing a single output bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Labels keeping the independent uses of one master seed apart.
pub mod label {
    pub const FBM_PATH: u64 = 0x01;
    pub const NOISE: u64 = 0x02;
    pub const RESIDUAL_RESAMPLE: u64 = 0x03;
    pub const PAIRS_RESAMPLE: u64 = 0x04;
    pub const LIMIT_DRAW: u64 = 0x05;
    pub const REPLICATE: u64 = 0x06;
    pub const GROUP: u64 = 0x07;
    pub const METHOD: u64 = 0x08;
    pub const TABLE_CELL: u64 = 0x09;
}

/// SplitMix64 finalizer; bijective on u64.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Independent RNG for the unit of work named by `path` under `master`.
///
/// Streams for distinct (master, path) pairs are computationally
/// independent; the same pair always yields the same stream.
pub fn substream(master: u64, path: &[u64]) -> ChaCha8Rng {
    let mut h = mix(master ^ 0x6A09_E667_F3BC_C909);
    for &part in path {
        h = mix(h.wrapping_add(GOLDEN).wrapping_add(part));
    }
    let mut seed = [0u8; 32];
    let mut s = h;
    for chunk in seed.chunks_exact_mut(8) {
        s = mix(s.wrapping_add(GOLDEN));
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// A derived master seed for a nested simulation stage (a group, a
/// replicate, a table cell) that will itself spawn substreams.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut h = mix(master ^ 0xBB67_AE85_84CA_A73B);
    for &part in path {
        h = mix(h.wrapping_add(GOLDEN).wrapping_add(part));
    }
    mix(h.wrapping_add(GOLDEN))
}
