//! Seed derivation for independent random streams.
//!
//! Every stochastic decision in a run draws from a stream keyed by
//! `(master_seed, generation, agent, purpose)`, so results never depend on the
//! order in which workers pick up tasks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tag mixed into derived seeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Inherit = 2,
    Task = 3,
    Terrain = 4,
    Train = 5,
    Tournament = 6,
    Extraction = 7,
    Oracle = 8,
    Baseline = 9,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes the key components into a single 64-bit seed.
pub fn derive_seed(master: u64, generation: u64, agent: u64, stream: Stream) -> u64 {
    let mut h = splitmix64(master);
    h = splitmix64(h ^ generation.wrapping_mul(0xA24B_AED4_963E_E407));
    h = splitmix64(h ^ agent.wrapping_mul(0x9FB2_1C65_1E98_DF25));
    splitmix64(h ^ (stream as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn stream_rng(master: u64, generation: u64, agent: u64, stream: Stream) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, generation, agent, stream))
}

pub fn seeded(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}
