//! Seeding, quasi-random streams and deterministic parallel reductions.
//!
//! Every estimator splits its budget into fixed-size batches. Batch `i` of a
//! call with seed `s` draws from a ChaCha stream keyed by `(s, i)`, so the
//! sample set never depends on how rayon schedules the batches. Reductions
//! collect batch results in index order before folding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Pairs or points handled by one parallel batch.
pub const BATCH: usize = 512;

/// How uniforms are produced inside samplers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    #[default]
    Random,
    /// Halton low-discrepancy sequence, offset per batch.
    Halton,
}

/// SplitMix64 finalizer, used to derive independent child seeds.
pub fn mix(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// RNG for a given seed and stream (batch index, member index, ...).
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const PRIMES: [u32; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131,
];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

/// Source of uniforms in [0,1): either a seeded RNG or a Halton stream.
pub enum Uniforms {
    Random(ChaCha8Rng),
    Halton { index: u64, dim: usize, rng: ChaCha8Rng },
}

impl Uniforms {
    pub fn new(mode: SampleMode, seed: u64, stream: u64) -> Self {
        match mode {
            SampleMode::Random => Uniforms::Random(rng_for(seed, stream)),
            // Halton indices start after a per-stream offset so batches cover
            // disjoint stretches of the sequence.
            SampleMode::Halton => Uniforms::Halton {
                index: 1 + stream * BATCH as u64 * 4,
                dim: 0,
                rng: rng_for(seed, stream),
            },
        }
    }

    /// Start a new point; Halton mode moves to the next sequence index.
    pub fn next_point(&mut self) {
        if let Uniforms::Halton { index, dim, .. } = self {
            *index += 1;
            *dim = 0;
        }
    }

    pub fn uniform(&mut self) -> f64 {
        match self {
            Uniforms::Random(rng) => rng.random::<f64>(),
            Uniforms::Halton { index, dim, rng } => {
                if *dim < PRIMES.len() {
                    let u = radical_inverse(*index, PRIMES[*dim] as u64);
                    *dim += 1;
                    u
                } else {
                    rng.random::<f64>()
                }
            }
        }
    }

    /// Standard normal via Box–Muller (works with either source).
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Raw RNG access for auxiliary randomness (signs, refinements).
    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        match self {
            Uniforms::Random(rng) => rng,
            Uniforms::Halton { rng, .. } => rng,
        }
    }
}

/// Number of batches needed to cover `budget` items.
pub fn batch_count(budget: usize) -> usize {
    budget.div_ceil(BATCH)
}

/// Items handled by batch `b` of a `budget`-sized job.
pub fn batch_len(budget: usize, b: usize) -> usize {
    (budget - b * BATCH).min(BATCH)
}

/// Runs `f` on every batch in parallel and keeps the best `(value, payload)`.
/// Ties resolve to the lowest batch index, so the result is independent of
/// thread count.
pub fn par_argmax<T, F>(budget: usize, f: F) -> Option<(f64, T)>
where
    T: Send,
    F: Fn(usize, usize) -> Option<(f64, T)> + Sync + Send,
{
    let results: Vec<Option<(f64, T)>> = (0..batch_count(budget))
        .into_par_iter()
        .map(|b| f(b, batch_len(budget, b)))
        .collect();
    let mut best: Option<(f64, T)> = None;
    for r in results.into_iter().flatten() {
        let better = match &best {
            None => true,
            Some((v, _)) => r.0 > *v || (v.is_nan() && !r.0.is_nan()),
        };
        if better {
            best = Some(r);
        }
    }
    best
}

/// log2(2^a + 2^b), stable for very negative arguments.
pub fn log2_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (1.0 + (lo - hi).exp2()).log2()
}

/// log2 of a nonnegative number, with log2(0) = -inf.
pub fn log2_of(x: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        x.log2()
    }
}

/// Uniform draw in `[lo, hi)`.
pub fn uniform_in<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}
