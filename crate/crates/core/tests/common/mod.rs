#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdentropy::linalg::CMatrix;
use sdentropy::model::{make_constellation, ChannelInstance, Constellation, ConstellationKind, Ordering};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(r: &mut ChaCha8Rng) -> Complex64 {
    // Box-Muller, independent of the crate's sampler
    let u1: f64 = r.random::<f64>().max(1e-300);
    let u2: f64 = r.random();
    let rad = (-u1.ln()).sqrt();
    let th = 2.0 * std::f64::consts::PI * u2;
    Complex64::new(rad * th.cos(), rad * th.sin())
}

pub fn random_matrix(n: usize, r: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| gaussian(r))
}

pub fn random_vec(n: usize, r: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..n).map(|_| gaussian(r)).collect()
}

pub fn random_channel(n: usize, ordering: Ordering, r: &mut ChaCha8Rng) -> ChannelInstance {
    ChannelInstance::new(random_matrix(n, r), ordering).unwrap()
}

pub fn binary() -> Constellation {
    make_constellation(ConstellationKind::Binary, 2).unwrap()
}

pub fn qam4() -> Constellation {
    make_constellation(ConstellationKind::Qam, 4).unwrap()
}

/// All index vectors of length `n` over `m` symbols.
pub fn all_indices(m: usize, n: usize) -> Vec<Vec<usize>> {
    let total = m.pow(n as u32);
    (0..total)
        .map(|mut t| {
            (0..n)
                .map(|_| {
                    let d = t % m;
                    t /= m;
                    d
                })
                .collect()
        })
        .collect()
}

pub fn symbols(alphabet: &[Complex64], idx: &[usize]) -> Vec<Complex64> {
    idx.iter().map(|&i| alphabet[i]).collect()
}

pub fn dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum()
}

/// `‖v − R·d‖²` by direct matrix-vector product.
pub fn direct_distance(v: &[Complex64], r: &CMatrix, alphabet: &[Complex64], idx: &[usize]) -> f64 {
    dist(v, &r.mul_vec(&symbols(alphabet, idx)))
}

/// Exact `ln f(z)` by brute force over `H·d` in the received domain, naive sum.
pub fn brute_log_density(h: &CMatrix, z: &[Complex64], alphabet: &[Complex64]) -> f64 {
    let n = h.cols();
    let m = alphabet.len();
    let d: Vec<f64> = all_indices(m, n)
        .iter()
        .map(|idx| dist(z, &h.mul_vec(&symbols(alphabet, idx))))
        .collect();
    let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
    let s: f64 = d.iter().map(|x| (-(x - dmin)).exp()).sum();
    -(n as f64) * (std::f64::consts::PI * m as f64).ln() - dmin + s.ln()
}

pub fn to_nalgebra(m: &CMatrix) -> nalgebra::DMatrix<Complex64> {
    nalgebra::DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}
