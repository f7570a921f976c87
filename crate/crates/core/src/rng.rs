//! Counter-based derivation of independent random streams.
//!
//! Every Monte Carlo replication owns its generator, seeded from the tuple
//! `(seed, stream role, replication index)` through a SplitMix64 finalizer.
//! Nothing is shared between replications, so the numbers a replication sees
//! do not depend on how the work is scheduled across threads.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// Purpose of a random stream inside one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamRole {
    Lambda = 1,
    Path = 2,
    Jumps = 3,
    Noise = 4,
    Sampling = 5,
    Oracle = 6,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes the stream coordinates into a single 64-bit key.
pub fn stream_key(seed: u64, role: StreamRole, index: u64) -> u64 {
    let a = splitmix(seed ^ (role as u64).wrapping_mul(GOLDEN));
    splitmix(a ^ splitmix(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Generator for replication `index` of the given role.
pub fn stream(seed: u64, role: StreamRole, index: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(stream_key(seed, role, index))
}
