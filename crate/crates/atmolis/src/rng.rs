//! Deterministic random-number plumbing.
//!
//! Every stochastic routine in this crate takes an explicit `u64` seed and
//! draws from a ChaCha8 stream, so identical (config, seed) pairs reproduce
//! identical output on any platform. Independent sub-streams are derived
//! from a master seed with [`derive_seed`] so that, for example, the noise
//! draw and the truth draw of a synthetic experiment never share a stream.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type SeedableChaCha = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeedableChaCha {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream seed from a master seed and a stream tag
/// (splitmix64 finalizer over the xor of the two).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn standard_normal_vector(rng: &mut SeedableChaCha, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

/// Standard normal matrix filled column by column, so each column is a
/// contiguous draw and the draw order is independent of the row count of
/// previously generated columns.
pub fn standard_normal_matrix(rng: &mut SeedableChaCha, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = StandardNormal.sample(rng);
        }
    }
    m
}
