//! Seeded quasi-random sample points.
//!
//! Halton points with a random Cranley–Patterson shift drawn from a
//! ChaCha stream, mapped into a box shrunk by a 5% margin on each side.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::BoxDomain;

const PRIMES: [u64; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];

pub const MARGIN: f64 = 0.05;

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Seeded low-discrepancy stream in `[0, 1)^dim`.
#[derive(Clone, Debug)]
pub struct Sampler {
    shift: Vec<f64>,
    index: u64,
}

impl Sampler {
    /// `stream` separates independent uses of the same seed.
    pub fn new(dim: usize, seed: u64, stream: u64) -> Sampler {
        assert!(dim <= PRIMES.len(), "at most {} sample dimensions", PRIMES.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let shift = (0..dim).map(|_| rng.random::<f64>()).collect();
        Sampler { shift, index: 1 }
    }

    pub fn next_unit(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        self.shift.iter().enumerate().map(|(d, s)| (radical_inverse(i, PRIMES[d]) + s).fract()).collect()
    }

    /// `n` points in `domain` shrunk by the margin.
    pub fn points(&mut self, domain: &BoxDomain, n: usize) -> Vec<Vec<f64>> {
        let inner = domain.shrink(MARGIN);
        (0..n).map(|_| inner.from_unit(&self.next_unit())).collect()
    }
}

/// Convenience: `n` points of a fresh sampler.
pub fn sample_points(domain: &BoxDomain, n: usize, seed: u64, stream: u64) -> Vec<Vec<f64>> {
    Sampler::new(domain.dim(), seed, stream).points(domain, n)
}
