//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream keyed by
//! `(seed, purpose)` and selected by an index (usually the sample or row
//! number). Output therefore never depends on evaluation order, and two
//! purposes never share randomness: changing the noise rate does not move
//! a single point of the cloud.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Means = 1,
    Cluster = 2,
    Offset = 3,
    Flip = 4,
    Init = 5,
}

/// Independent stream for `(seed, purpose, index)`.
pub fn substream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Derives a child seed; used by the experiment runner to split a run seed
/// into training-data, validation-data and initialization seeds.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
