//! Seed derivation for independent per-replication streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream holding the environment draw (means or loss matrix).
pub const ENV_STREAM: u64 = 1;
/// Stream holding the shared sampling uniforms and reward noise.
pub const NOISE_STREAM: u64 = 2;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `master` with each part in order; distinct paths give unrelated seeds.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |h, &p| splitmix64(h ^ splitmix64(p)))
}

pub fn stream(master: u64, replication: usize, which: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, &[replication as u64, which]))
}
