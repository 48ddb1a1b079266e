//! Counter-based seed derivation.
//!
//! Every Monte Carlo run owns a seed derived from the master seed and its
//! coordinates, and every random quantity inside a run is drawn from its own
//! ChaCha stream. Changing how many numbers one consumer draws never shifts
//! another consumer's stream, and results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use num_complex::Complex64;

/// Independent random streams used inside one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    BsChannel = 1,
    JammerChannel = 2,
    BsCodebook = 3,
    JammerCodebook = 4,
    UeCodebook = 5,
    KnownSymbols = 6,
    BsProbing = 7,
    JammerProbing = 8,
    Noise = 9,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a list of counters into a single 64-bit seed.
pub fn derive_seed(master: u64, counters: &[u64]) -> u64 {
    counters
        .iter()
        .fold(splitmix64(master), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

/// RNG for one purpose within a run.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Draws a zero-mean unit-variance circularly-symmetric complex Gaussian.
pub fn complex_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
