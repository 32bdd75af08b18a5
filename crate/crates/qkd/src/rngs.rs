//! Seeded random streams.
//!
//! One master seed deterministically derives an independent stream per
//! party and per subsystem, so turning an eavesdropper on or off never
//! perturbs the legitimate parties' draws.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream labels. Each (master seed, label) pair yields one stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamId {
    Sender,
    Receiver,
    Eve,
    Channel,
    Source,
    /// Public randomness both parties derive identically (reconciliation
    /// permutations). Anything drawn from it is considered known to Eve.
    Public,
}

impl StreamId {
    fn label(self) -> u64 {
        match self {
            StreamId::Sender => 1,
            StreamId::Receiver => 2,
            StreamId::Eve => 3,
            StreamId::Channel => 4,
            StreamId::Source => 5,
            StreamId::Public => 6,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a sub-seed from a master seed and a salt (used by sweep runs
/// so every (value, repeat) cell gets its own reproducible session seed).
pub fn derive_seed(master: u64, salt: u64) -> u64 {
    splitmix64(master ^ splitmix64(salt))
}

/// Derives the stream for `id` from the session master seed.
pub fn stream(master_seed: u64, id: StreamId) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(master_seed ^ splitmix64(id.label())))
}

/// Draws one bit from the stream. All protocol-level coin flips go
/// through here so the draw count per operation is exact.
pub fn random_bit(rng: &mut impl RngCore) -> bool {
    rng.next_u32() & 1 == 1
}

/// Uniform index in `0..n`. `n` must be nonzero.
pub fn random_index(rng: &mut impl RngCore, n: usize) -> usize {
    // modulo bias is < 2^-40 for desk-scale n; irrelevant here
    (rng.next_u64() % n as u64) as usize
}

/// Uniform f64 in [0, 1).
pub fn random_unit(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Poisson sample by Knuth's product-of-uniforms method. Fine for the
/// small means a photon source uses.
pub fn poisson(rng: &mut impl RngCore, mean: f64) -> usize {
    let threshold = (-mean).exp();
    let mut k = 0usize;
    let mut p = 1.0;
    loop {
        p *= random_unit(rng);
        if p <= threshold {
            return k;
        }
        k += 1;
    }
}

/// Fisher-Yates permutation of `0..n` drawn from `rng`.
pub fn permutation(rng: &mut impl RngCore, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, random_index(rng, i + 1));
    }
    perm
}
