//! Seed derivation for reproducible, order-independent random streams.
//!
//! Every consumer of randomness asks for a stream keyed by the user seed, a
//! domain tag and a path of indices (trial, edge, iteration, ...). Streams are
//! independent ChaCha8 generators, so results do not depend on the order in
//! which streams are drawn or on how work is spread over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domain tags keep streams for different purposes apart even when their
/// index paths coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    ErGraph = 1,
    Adversary = 2,
    Cluster = 3,
    Comparisons = 4,
    Sketch = 5,
    Trial = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a 64-bit sub-seed from a seed, a domain and an index path.
pub fn derive_seed(seed: u64, domain: Domain, path: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ splitmix64(domain as u64));
    for &p in path {
        h = splitmix64(h ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

/// Opens the stream identified by `(seed, domain, path)`.
pub fn stream(seed: u64, domain: Domain, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, domain, path))
}
