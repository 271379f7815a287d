//! Seeded random streams.
//!
//! Every stochastic operation takes an explicit `u64` seed and draws from
//! ChaCha8 (`rand_chacha::ChaCha8Rng`), whose output stream is fixed by its
//! algorithm and therefore identical on every platform. Independent streams
//! derived from one seed (one per Monte Carlo sample, one per scene, ...) use
//! ChaCha's 64-bit stream selector rather than ad-hoc seed arithmetic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

/// Generator for `seed`, stream 0.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for `seed` on an independent stream.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    use rand::Rng as _;
    lo + (hi - lo) * rng.random::<f64>()
}
