//! Seeded random streams.
//!
//! A run is identified by a root seed. Independent chains (or seeds in a
//! comparison) get their own ChaCha stream so they can run in any order or
//! concurrently without changing each other's draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream `index` derived from root `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws an index from a (not necessarily normalized) nonnegative
/// distribution. Zero-probability entries are never returned. Returns `None`
/// when the distribution has no mass.
pub fn draw_index<R: Rng + ?Sized>(rng: &mut R, dist: &[f64]) -> Option<usize> {
    let total: f64 = dist.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let u = rng.random::<f64>() * total;
    let mut cum = 0.0;
    let mut last = None;
    for (i, &p) in dist.iter().enumerate() {
        if p > 0.0 {
            cum += p;
            last = Some(i);
            if u < cum {
                return Some(i);
            }
        }
    }
    // rounding left u just past the accumulated mass
    last
}
