//! Dense complex linear algebra: Householder QR with a real nonnegative
//! diagonal (optionally with greedy column ordering) and Cholesky-backed
//! Hermitian positive-definite matrices.

use num_complex::Complex64;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Relative rank threshold on |r_kk| against the Frobenius norm of the input.
pub const RANK_TOL: f64 = 1e-12;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, rhs: &CMatrix) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, x.len(), "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `selfᴴ · x`.
    pub fn adjoint_mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.rows, x.len(), "matrix-vector dimension mismatch");
        let mut out = vec![ZERO; self.cols];
        for (i, xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * xi;
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, rhs: &CMatrix) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, rhs: &CMatrix) -> Self {
        self.add(&rhs.scale(-1.0))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Contiguous sub-block `[r0, r0+nr) × [c0, c0+nc)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        Self::from_fn(nr, nc, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Columns reordered so that column `k` of the result is column `perm[k]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.cols);
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, perm[j])])
    }

    /// `self · selfᴴ`.
    pub fn gram_outer(&self) -> Self {
        self.matmul(&self.adjoint())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// `‖x‖²`.
pub fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

/// Result of a QR factorization `H·Π = Q·R`.
#[derive(Debug, Clone, PartialEq)]
pub struct QrFactors {
    pub q: CMatrix,
    pub r: CMatrix,
    /// Column `k` of `H·Π` is column `perm[k]` of `H`.
    pub perm: Vec<usize>,
}

/// Householder QR of a square full-rank matrix, `R` with real nonnegative diagonal.
pub fn qr_positive(h: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let f = householder_qr(h, false)?;
    Ok((f.q, f.r))
}

/// Householder QR with greedy ordering: at each step the remaining column with
/// the smallest residual norm is factored next, so `|r_kk|` trends upward.
pub fn sorted_qr(h: &CMatrix) -> Result<QrFactors> {
    householder_qr(h, true)
}

fn householder_qr(h: &CMatrix, smallest_first: bool) -> Result<QrFactors> {
    if !h.is_square() {
        return Err(Error::invalid(format!(
            "QR needs a square matrix, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    let n = h.rows();
    let scale = h.frobenius_norm();
    let mut a = h.clone();
    let mut q = CMatrix::identity(n);
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        if smallest_first {
            let residual = |j: usize| -> f64 { (k..n).map(|i| a[(i, j)].norm_sqr()).sum() };
            let mut best = k;
            let mut best_norm = residual(k);
            for j in k + 1..n {
                let r = residual(j);
                if r < best_norm {
                    best = j;
                    best_norm = r;
                }
            }
            if best != k {
                for i in 0..n {
                    let tmp = a[(i, k)];
                    a[(i, k)] = a[(i, best)];
                    a[(i, best)] = tmp;
                }
                perm.swap(k, best);
            }
        }

        let x: Vec<Complex64> = (k..n).map(|i| a[(i, k)]).collect();
        let xnorm = norm_sqr(&x).sqrt();
        if xnorm <= RANK_TOL * scale || xnorm == 0.0 {
            return Err(Error::SingularMatrix {
                column: k,
                magnitude: xnorm,
            });
        }
        // reflector mapping x onto alpha·e1 with alpha = -phase(x0)·‖x‖
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { ONE };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm_sqr = norm_sqr(&v);
        if vnorm_sqr > 0.0 {
            // A ← (I − 2vvᴴ/‖v‖²)·A on rows k..n
            for j in k..n {
                let dot: Complex64 = v.iter().enumerate().map(|(t, vt)| vt.conj() * a[(k + t, j)]).sum();
                let f = dot * (2.0 / vnorm_sqr);
                for (t, vt) in v.iter().enumerate() {
                    a[(k + t, j)] -= vt * f;
                }
            }
            // Q ← Q·(I − 2vvᴴ/‖v‖²) on columns k..n
            for i in 0..n {
                let dot: Complex64 = v.iter().enumerate().map(|(t, vt)| q[(i, k + t)] * vt).sum();
                let f = dot * (2.0 / vnorm_sqr);
                for (t, vt) in v.iter().enumerate() {
                    q[(i, k + t)] -= f * vt.conj();
                }
            }
        }
        for i in k + 1..n {
            a[(i, k)] = ZERO;
        }
    }

    // absorb diagonal phases into Q so that r_kk is real and nonnegative
    for k in 0..n {
        let d = a[(k, k)];
        let mag = d.norm();
        let ph = if mag > 0.0 { d / mag } else { ONE };
        for j in k..n {
            a[(k, j)] *= ph.conj();
        }
        a[(k, k)] = Complex64::new(mag, 0.0);
        for i in 0..n {
            q[(i, k)] *= ph;
        }
    }

    Ok(QrFactors { q, r: a, perm })
}

/// Solves `R·x = b` for upper-triangular `R`.
pub fn back_substitute(r: &CMatrix, b: &[Complex64]) -> Vec<Complex64> {
    let n = r.rows();
    let mut x = vec![ZERO; n];
    for i in (0..n).rev() {
        let mut acc = b[i];
        for j in i + 1..n {
            acc -= r[(i, j)] * x[j];
        }
        x[i] = acc / r[(i, i)];
    }
    x
}

/// A Hermitian positive-definite matrix with its cached Cholesky factor `K = L·Lᴴ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianPD {
    matrix: CMatrix,
    chol: CMatrix,
}

impl HermitianPD {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::invalid("Hermitian matrix must be square"));
        }
        let n = matrix.rows();
        let mut l = CMatrix::zeros(n, n);
        for j in 0..n {
            let mut diag = matrix[(j, j)].re;
            for k in 0..j {
                diag -= l[(j, k)].norm_sqr();
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::NumericDomain(format!(
                    "matrix is not positive definite (pivot {diag:e} at {j})"
                )));
            }
            let ljj = diag.sqrt();
            l[(j, j)] = Complex64::new(ljj, 0.0);
            for i in j + 1..n {
                let mut s = matrix[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { matrix, chol: l })
    }

    /// `ρ·A·Aᴴ + I`.
    pub fn signal_plus_noise(a: &CMatrix, rho: f64) -> Result<Self> {
        let n = a.rows();
        Self::new(a.gram_outer().scale(rho).add(&CMatrix::identity(n)))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn cholesky(&self) -> &CMatrix {
        &self.chol
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Natural-log determinant, `Σ 2·ln L_kk`.
    pub fn logdet(&self) -> f64 {
        (0..self.dim()).map(|k| 2.0 * self.chol[(k, k)].re.ln()).sum()
    }

    /// `xᴴ·K⁻¹·x` as `‖L⁻¹x‖²`.
    pub fn quad_form(&self, x: &[Complex64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "quadratic form dimension mismatch");
        let n = self.dim();
        let mut y = vec![ZERO; n];
        for i in 0..n {
            let mut acc = x[i];
            for k in 0..i {
                acc -= self.chol[(i, k)] * y[k];
            }
            y[i] = acc / self.chol[(i, i)].re;
        }
        norm_sqr(&y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn random_matrix(n: usize, seed: u64) -> CMatrix {
        let mut r = rng::stream(seed, 77, 0);
        CMatrix::from_fn(n, n, |_, _| rng::complex_normal(&mut r))
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn assert_unitary(q: &CMatrix) {
        let err = q.adjoint().matmul(q).sub(&CMatrix::identity(q.rows())).frobenius_norm();
        assert!(err <= 1e-10, "QᴴQ − I = {err:e}");
    }

    #[test]
    fn qr_of_identity_and_scaled_identity() {
        let (q, r) = qr_positive(&CMatrix::identity(3)).unwrap();
        assert!(q.sub(&CMatrix::identity(3)).frobenius_norm() < 1e-15);
        assert!(r.sub(&CMatrix::identity(3)).frobenius_norm() < 1e-15);

        let (q, r) = qr_positive(&CMatrix::identity(3).scale(2.0)).unwrap();
        assert!(q.sub(&CMatrix::identity(3)).frobenius_norm() < 1e-15);
        assert!(r.sub(&CMatrix::identity(3).scale(2.0)).frobenius_norm() < 1e-15);
    }

    #[test]
    fn qr_reconstructs_random_matrix() {
        let h = random_matrix(5, 11);
        let (q, r) = qr_positive(&h).unwrap();
        assert_unitary(&q);
        let err = q.matmul(&r).sub(&h).frobenius_norm() / h.frobenius_norm();
        assert!(err <= 1e-9, "relative reconstruction error {err:e}");
        for i in 0..5 {
            assert!(r[(i, i)].im == 0.0 && r[(i, i)].re >= 0.0);
            for j in 0..i {
                assert_eq!(r[(i, j)], ZERO);
            }
        }
    }

    #[test]
    fn sorted_qr_orders_diagonal_case_exactly() {
        let h = CMatrix::from_diagonal(&[c(3.0), c(1.0), c(2.0)]);
        let f = sorted_qr(&h).unwrap();
        let diag: Vec<f64> = (0..3).map(|k| f.r[(k, k)].re).collect();
        assert_eq!(f.perm, vec![1, 2, 0]);
        for (got, want) in diag.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn sorted_qr_identity_keeps_order() {
        let f = sorted_qr(&CMatrix::identity(4)).unwrap();
        assert_eq!(f.perm, vec![0, 1, 2, 3]);
    }

    #[test]
    fn sorted_qr_reconstructs_permuted_random_matrix() {
        let h = random_matrix(8, 5);
        let f = sorted_qr(&h).unwrap();
        assert_unitary(&f.q);
        let hp = h.permute_columns(&f.perm);
        let err = f.q.matmul(&f.r).sub(&hp).frobenius_norm();
        assert!(err <= 1e-9 * h.frobenius_norm(), "{err:e}");
        // first pick is the globally smallest column
        let min_col = (0..8)
            .min_by(|&a, &b| norm_sqr(&h.column(a)).total_cmp(&norm_sqr(&h.column(b))))
            .unwrap();
        assert_eq!(f.perm[0], min_col);
    }

    #[test]
    fn rank_deficient_is_rejected() {
        let mut h = random_matrix(3, 2);
        for i in 0..3 {
            h[(i, 2)] = h[(i, 0)] * 2.0;
        }
        assert!(matches!(qr_positive(&h), Err(Error::SingularMatrix { .. })));
        assert!(matches!(sorted_qr(&CMatrix::zeros(2, 2)), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn logdet_basic_cases() {
        let k = HermitianPD::new(CMatrix::identity(4)).unwrap();
        assert_eq!(k.logdet(), 0.0);
        let k = HermitianPD::new(CMatrix::from_diagonal(&[c(2.0), c(2.0)])).unwrap();
        assert!((k.logdet() - 2.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn quad_form_basic_cases() {
        let k = HermitianPD::new(CMatrix::identity(2)).unwrap();
        let x = [Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.5)];
        assert!((k.quad_form(&x) - norm_sqr(&x)).abs() < 1e-15);
        let k = HermitianPD::new(CMatrix::identity(2).scale(4.0)).unwrap();
        assert!((k.quad_form(&[c(2.0), c(0.0)]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cholesky_reconstructs() {
        let h = random_matrix(6, 9);
        let k = HermitianPD::signal_plus_noise(&h, 3.0).unwrap();
        let l = k.cholesky();
        let err = l.matmul(&l.adjoint()).sub(k.matrix()).frobenius_norm();
        assert!(err <= 1e-9 * k.matrix().frobenius_norm());
    }

    #[test]
    fn non_pd_is_numeric_domain_error() {
        let m = CMatrix::from_diagonal(&[c(1.0), c(-1.0)]);
        assert!(matches!(HermitianPD::new(m), Err(Error::NumericDomain(_))));
    }

    #[test]
    fn back_substitution_solves() {
        let h = random_matrix(4, 3);
        let (_, r) = qr_positive(&h).unwrap();
        let x = vec![c(1.0), Complex64::new(0.0, 1.0), c(-2.0), c(0.5)];
        let b = r.mul_vec(&x);
        let got = back_substitute(&r, &b);
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).norm() < 1e-12);
        }
    }
}
