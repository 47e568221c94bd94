//! Constellations, input and noise sampling, and the two channel families
//! (circulant FIR and time/frequency-selective `A·G`).

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, QrFactors};
use crate::rng::complex_normal_vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstellationKind {
    Binary,
    Pam,
    Qam,
}

impl std::str::FromStr for ConstellationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" | "bpsk" => Ok(Self::Binary),
            "pam" => Ok(Self::Pam),
            "qam" => Ok(Self::Qam),
            other => Err(Error::invalid(format!("unknown constellation kind `{other}`"))),
        }
    }
}

/// Finite symbol set with unit average energy and a uniform prior.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    kind: ConstellationKind,
    points: Vec<Complex64>,
}

fn pam_levels(m: usize) -> Vec<f64> {
    (0..m).map(|i| (2 * i) as f64 - (m as f64 - 1.0)).collect()
}

impl Constellation {
    /// Builds a unit-energy constellation with points sorted by (real, imag).
    pub fn new(kind: ConstellationKind, size: usize) -> Result<Self> {
        let unsupported = || Error::invalid(format!("unsupported constellation {kind:?} with M_c = {size}"));
        if size < 2 || !size.is_power_of_two() {
            return Err(unsupported());
        }
        let mut points: Vec<Complex64> = match kind {
            ConstellationKind::Binary => {
                if size != 2 {
                    return Err(unsupported());
                }
                vec![Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)]
            }
            ConstellationKind::Pam => {
                let scale = ((size * size - 1) as f64 / 3.0).sqrt();
                pam_levels(size).into_iter().map(|l| Complex64::new(l / scale, 0.0)).collect()
            }
            ConstellationKind::Qam => {
                // M = 4^k: a sqrt(M)-PAM on each axis
                if size.trailing_zeros() % 2 != 0 {
                    return Err(unsupported());
                }
                let side = 1usize << (size.trailing_zeros() / 2);
                let scale = (2.0 * (size - 1) as f64 / 3.0).sqrt();
                let levels = pam_levels(side);
                let mut pts = Vec::with_capacity(size);
                for &re in &levels {
                    for &im in &levels {
                        pts.push(Complex64::new(re / scale, im / scale));
                    }
                }
                pts
            }
        };
        points.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Ok(Self { kind, points })
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    /// Points multiplied by `√ρ`.
    pub fn scaled(&self, rho: f64) -> Vec<Complex64> {
        let s = rho.sqrt();
        self.points.iter().map(|p| p * s).collect()
    }

    /// Index of the scaled point nearest to `x`; ties go to the lowest index.
    pub fn nearest(scaled: &[Complex64], x: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in scaled.iter().enumerate() {
            let d = (x - p).norm_sqr();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }
}

/// Convenience for `Constellation::new`.
pub fn make_constellation(kind: ConstellationKind, size: usize) -> Result<Constellation> {
    Constellation::new(kind, size)
}

/// One transmitted vector `d = √ρ·s`, kept together with its symbol indices.
#[derive(Debug, Clone, PartialEq)]
pub struct InputVector {
    pub indices: Vec<usize>,
    pub symbols: Vec<Complex64>,
    pub rho: f64,
}

impl InputVector {
    pub fn from_indices(constellation: &Constellation, indices: Vec<usize>, rho: f64) -> Self {
        let s = rho.sqrt();
        let symbols = indices.iter().map(|&i| constellation.points()[i] * s).collect();
        Self { indices, symbols, rho }
    }

    /// Uniform draw over the `N_t`-fold product of the constellation.
    pub fn draw<R: Rng + ?Sized>(constellation: &Constellation, n_t: usize, rho: f64, rng: &mut R) -> Self {
        let m = constellation.size();
        let indices = (0..n_t).map(|_| rng.random_range(0..m)).collect();
        Self::from_indices(constellation, indices, rho)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Column ordering applied before triangularization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    /// Plain `H = Q·R`.
    Natural,
    /// Greedy smallest-residual-first ordering, `H·Π = Q·R`.
    Sorted,
}

/// A square channel matrix with cached QR factors.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelInstance {
    h: CMatrix,
    ordering: Ordering,
    factors: QrFactors,
    lambda_sq: Vec<f64>,
}

impl ChannelInstance {
    pub fn new(h: CMatrix, ordering: Ordering) -> Result<Self> {
        let factors = match ordering {
            Ordering::Natural => {
                let (q, r) = linalg::qr_positive(&h)?;
                QrFactors {
                    q,
                    r,
                    perm: (0..h.cols()).collect(),
                }
            }
            Ordering::Sorted => linalg::sorted_qr(&h)?,
        };
        let lambda_sq = (0..h.rows()).map(|k| factors.r[(k, k)].norm_sqr()).collect();
        Ok(Self {
            h,
            ordering,
            factors,
            lambda_sq,
        })
    }

    /// Same matrix, refactored with another ordering.
    pub fn with_ordering(&self, ordering: Ordering) -> Result<Self> {
        if ordering == self.ordering {
            return Ok(self.clone());
        }
        Self::new(self.h.clone(), ordering)
    }

    pub fn n_t(&self) -> usize {
        self.h.rows()
    }

    pub fn h(&self) -> &CMatrix {
        &self.h
    }

    pub fn q(&self) -> &CMatrix {
        &self.factors.q
    }

    pub fn r(&self) -> &CMatrix {
        &self.factors.r
    }

    pub fn perm(&self) -> &[usize] {
        &self.factors.perm
    }

    pub fn ordering(&self) -> Ordering {
        self.ordering
    }

    /// `|r_kk|²` in factor order.
    pub fn lambda_sq(&self) -> &[f64] {
        &self.lambda_sq
    }

    /// `v = Qᴴ·z`.
    pub fn rotate(&self, z: &[Complex64]) -> Vec<Complex64> {
        self.factors.q.adjoint_mul_vec(z)
    }

    /// Maps a vector in channel-column order into factor order (`Πᵀ·x`).
    pub fn to_factor_order<T: Copy>(&self, x: &[T]) -> Vec<T> {
        self.factors.perm.iter().map(|&p| x[p]).collect()
    }

    /// Inverse of [`ChannelInstance::to_factor_order`].
    pub fn from_factor_order<T: Copy + Default>(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); x.len()];
        for (k, &p) in self.factors.perm.iter().enumerate() {
            out[p] = x[k];
        }
        out
    }
}

/// The memory-10 FIR taps `g_l = 1/(1+(l−5)²)`, `l = 0..=10` (before normalization).
pub fn memory10_taps() -> Vec<f64> {
    (0..=10).map(|l| 1.0 / (1.0 + ((l as f64) - 5.0).powi(2))).collect()
}

/// Exponentially decaying taps `g_l = 2^{−l}`, `l = 0..=memory`.
pub fn exponential_taps(memory: usize) -> Vec<f64> {
    (0..=memory).map(|l| 0.5f64.powi(l as i32)).collect()
}

/// Rescales taps so that `Σ|g_l|² = 1`.
pub fn normalize_taps(g: &[f64]) -> Result<Vec<f64>> {
    if g.is_empty() {
        return Err(Error::invalid("FIR taps must not be empty"));
    }
    let energy: f64 = g.iter().map(|x| x * x).sum();
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(Error::invalid("FIR taps must not be all zero"));
    }
    let s = energy.sqrt();
    Ok(g.iter().map(|x| x / s).collect())
}

/// Circulant matrix with first column `g` (power-normalized, zero-padded, wrapped).
pub fn circulant(g: &[f64], n_t: usize) -> Result<CMatrix> {
    if n_t == 0 {
        return Err(Error::invalid("N_t must be positive"));
    }
    let g = normalize_taps(g)?;
    let mut col = vec![0.0; n_t];
    for (l, &gl) in g.iter().enumerate() {
        col[l % n_t] += gl;
    }
    Ok(CMatrix::from_fn(n_t, n_t, |i, j| {
        Complex64::new(col[(i + n_t - j) % n_t], 0.0)
    }))
}

/// Circulant FIR channel, naturally ordered.
pub fn fir_channel(g: &[f64], n_t: usize) -> Result<ChannelInstance> {
    ChannelInstance::new(circulant(g, n_t)?, Ordering::Natural)
}

/// `H = A·G` with `A = diag(a_i)`, `a_i ~ CN(0,1)`, and `G` circulant with
/// taps `2^{−l}`, `l = 0..=memory`.
pub fn selective_channel<R: Rng + ?Sized>(n_t: usize, memory: usize, rng: &mut R) -> Result<ChannelInstance> {
    if n_t == 0 || memory >= n_t {
        return Err(Error::invalid(format!(
            "selective channel needs 0 <= L <= N_t - 1, got L = {memory}, N_t = {n_t}"
        )));
    }
    let a = complex_normal_vec(rng, n_t);
    let g = circulant(&exponential_taps(memory), n_t)?;
    let h = CMatrix::from_diagonal(&a).matmul(&g);
    ChannelInstance::new(h, Ordering::Natural)
}

/// `z = H·d + n` with `n ~ CN(0, I)`; returns `(z, n)`.
pub fn synthesize<R: Rng + ?Sized>(
    channel: &ChannelInstance,
    d: &InputVector,
    rng: &mut R,
) -> (Vec<Complex64>, Vec<Complex64>) {
    assert_eq!(d.len(), channel.n_t(), "input length does not match channel");
    let n = complex_normal_vec(rng, channel.n_t());
    let mut z = channel.h().mul_vec(&d.symbols);
    for (zi, ni) in z.iter_mut().zip(&n) {
        *zi += ni;
    }
    (z, n)
}
