//! Seeded generators and per-stage seed derivation.
//!
//! Every random decision in a run is drawn from a generator seeded by
//! [`derive_seed`]`(master, stream, counter)`. Streams are fixed per stage, so
//! adding a variant or an iteration never shifts the randomness seen by the
//! others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream identifiers for [`derive_seed`].
pub mod stream {
    pub const MODEL: u64 = 1;
    pub const CLUSTER: u64 = 2;
    pub const CLUSTER_SEED_ITER: u64 = 3;
    pub const SPECIALISTS: u64 = 4;
    pub const TUNING: u64 = 5;
    pub const ELBOW: u64 = 6;
    pub const GROUP: u64 = 7;
    pub const SYNTH: u64 = 8;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64, counter: u64) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(b ^ counter.wrapping_mul(0xA076_1D64_78BD_642F))
}
