//! Counter-based random streams.
//!
//! Every Monte-Carlo trial draws from its own ChaCha stream keyed by the
//! experiment seed and addressed by the trial coordinates, so results do not
//! depend on execution order or thread count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream id reserved for the input draw of outer trial `i`.
const INPUT_LANE: u64 = 0xFFFF_FFFF;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn key(seed: u64, domain: u64) -> [u8; 32] {
    let mut out = [0u8; 32];
    let mut state = seed ^ splitmix64(domain);
    for chunk in out.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    out
}

/// A generator for stream `(seed, domain, stream)`.
pub fn stream(seed: u64, domain: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key(seed, domain));
    rng.set_stream(stream);
    rng
}

/// Domains keep unrelated consumers of one seed apart.
pub mod domain {
    pub const MONTE_CARLO: u64 = 1;
    pub const CHANNEL: u64 = 2;
    pub const SEQUENCE: u64 = 3;
}

/// Stream for the input vector of outer trial `i`.
pub fn input_stream(seed: u64, i: usize) -> ChaCha8Rng {
    stream(seed, domain::MONTE_CARLO, ((i as u64) << 32) | INPUT_LANE)
}

/// Stream for the noise vector of trial `(i, j)`.
pub fn noise_stream(seed: u64, i: usize, j: usize) -> ChaCha8Rng {
    debug_assert!((j as u64) < INPUT_LANE);
    stream(seed, domain::MONTE_CARLO, ((i as u64) << 32) | j as u64)
}

/// One draw from CN(0, 1): independent real and imaginary parts of variance 1/2.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| complex_normal(rng)).collect()
}
