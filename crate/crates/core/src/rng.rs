//! Seed expansion. One master seed fans out into independent ChaCha streams,
//! so every noise source (ε, η, ξ, ζ, permutations, data) can be replayed alone.

use ndiff::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha8Rng;

/// Named substreams of a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init,
    Shuffle,
    PastNoise,
    OutcomeNoise,
    AuxNoise,
    Permutation,
    Data,
    Sampling,
    Replication(u64),
    Step(u64),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init => 1,
            Stream::Shuffle => 2,
            Stream::PastNoise => 3,
            Stream::OutcomeNoise => 4,
            Stream::AuxNoise => 5,
            Stream::Permutation => 6,
            Stream::Data => 7,
            Stream::Sampling => 8,
            Stream::Replication(k) => 1_000 + k,
            Stream::Step(t) => 1_000_000 + t,
        }
    }
}

pub fn substream(seed: u64, stream: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// Derives a child seed, for nesting (replication -> component -> noise).
pub fn child_seed(seed: u64, stream: Stream) -> u64 {
    substream(seed, stream).random()
}

pub fn standard_normal(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Fisher–Yates permutation of `0..n`.
pub fn permutation(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}
