//! Dense symmetric matrices and the spectral functions built on them.
//!
//! Everything here goes through a full symmetric eigendecomposition, which is
//! fine for the matrix sizes the online learners work with (a few hundred rows
//! at most).

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues with `|λ| <= PINV_RANK_TOL * max|λ|` are treated as zero by [`pinv`].
pub const PINV_RANK_TOL: f64 = 1e-10;

/// Relative tolerance (against the Frobenius norm) below which a negative
/// eigenvalue is still accepted as numerical noise by [`sqrt_psd`].
pub const PSD_CLIP_TOL: f64 = 1e-10;

/// A dense real symmetric matrix.
///
/// Construction symmetrizes the input as `(A + Aᵀ) / 2`, so `self[(i, j)]`
/// and `self[(j, i)]` are bitwise equal for every stored value.
#[derive(Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Wraps a square matrix, symmetrizing it.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidParameter("matrix dimension must be at least 1".into()));
        }
        Ok(Self::symmetrized(m))
    }

    fn symmetrized(mut m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::NotSquare {
                rows: n,
                cols: rows.first().map_or(0, |r| r.len()),
            });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(n > 0, "matrix dimension must be at least 1");
        Self::symmetrized(DMatrix::from_fn(n, n, f))
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_fn(n, |_, _| 0.0)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// The all-ones matrix.
    pub fn ones(n: usize) -> Self {
        Self::from_fn(n, |_, _| 1.0)
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self::from_fn(d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    /// `V diag(values) Vᵀ` for a matrix `V` whose columns are the eigenvectors.
    pub fn from_spectrum(vectors: &DMatrix<f64>, values: &[f64]) -> Self {
        let mut scaled = vectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= values[k];
        }
        Self::symmetrized(scaled * vectors.transpose())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    #[inline]
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Sets entries `(i, j)` and `(j, i)`.
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.0[(i, j)] = v;
        self.0[(j, i)] = v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// `‖vec(A)‖₁`.
    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, c: f64) -> Self {
        SymMatrix(&self.0 * c)
    }

    /// `self · x · self`, symmetrized.
    pub fn congruence(&self, x: &SymMatrix) -> SymMatrix {
        Self::symmetrized(&self.0 * &x.0 * &self.0)
    }

    /// `B · self · Bᵀ` for a general (possibly rectangular) `B`.
    pub fn transform(&self, b: &DMatrix<f64>) -> SymMatrix {
        Self::symmetrized(b * &self.0 * b.transpose())
    }

    /// Product of two symmetric matrices; the result is generally not symmetric.
    pub fn matmul(&self, other: &SymMatrix) -> DMatrix<f64> {
        &self.0 * &other.0
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(*eigh(self)?.values.last().expect("dim >= 1"))
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        (&self.0 - &other.0).iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix{}", self.0)
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, c: f64) -> SymMatrix {
        self.scale(c)
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        self.scale(-1.0)
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: DMatrix<f64>,
}

impl Eigh {
    /// Rebuilds `V diag(f(λ)) Vᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let mapped: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        SymMatrix::from_spectrum(&self.vectors, &mapped)
    }
}

pub fn eigh(a: &SymMatrix) -> Result<Eigh> {
    let n = a.dim();
    let dec = SymmetricEigen::try_new(a.0.clone(), f64::EPSILON, 1000 * n.max(1))
        .ok_or(Error::EigenNoConvergence { dim: n })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| dec.eigenvalues[q].total_cmp(&dec.eigenvalues[p]));
    let values = order.iter().map(|&k| dec.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, c| dec.eigenvectors[(i, order[c])]);
    Ok(Eigh { values, vectors })
}

/// Frobenius-nearest positive semi-definite matrix.
pub fn psd_project(a: &SymMatrix) -> Result<SymMatrix> {
    Ok(eigh(a)?.map(|l| l.max(0.0)))
}

/// Principal square root of a positive semi-definite matrix.
pub fn sqrt_psd(a: &SymMatrix) -> Result<SymMatrix> {
    let e = eigh(a)?;
    let min = *e.values.last().expect("dim >= 1");
    if min < -PSD_CLIP_TOL * a.frobenius_norm() {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    Ok(e.map(|l| l.max(0.0).sqrt()))
}

/// Inverse of a strictly positive definite matrix via its eigendecomposition.
pub fn inv_pd(a: &SymMatrix) -> Result<SymMatrix> {
    let e = eigh(a)?;
    if *e.values.last().expect("dim >= 1") <= 0.0 {
        return Err(Error::NotPd);
    }
    Ok(e.map(|l| 1.0 / l))
}

/// Moore–Penrose pseudo-inverse.
pub fn pinv(a: &SymMatrix) -> Result<SymMatrix> {
    let e = eigh(a)?;
    let largest = e.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cutoff = PINV_RANK_TOL * largest;
    Ok(e.map(|l| if l.abs() <= cutoff { 0.0 } else { 1.0 / l }))
}

/// `ln det A` for a positive definite `A`.
pub fn logdet(a: &SymMatrix) -> Result<f64> {
    let chol = Cholesky::new(a.0.clone()).ok_or(Error::NotPd)?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..a.dim() {
        let d = l[(i, i)];
        if !(d > 0.0) {
            return Err(Error::NotPd);
        }
        acc += d.ln();
    }
    Ok(2.0 * acc)
}

/// Cholesky-based inverse of a positive definite matrix, together with its log-determinant.
pub(crate) fn inv_and_logdet(a: &SymMatrix) -> Result<(SymMatrix, f64)> {
    let chol = Cholesky::new(a.0.clone()).ok_or(Error::NotPd)?;
    let mut acc = 0.0;
    {
        let l = chol.l_dirty();
        for i in 0..a.dim() {
            acc += l[(i, i)].ln();
        }
    }
    if !acc.is_finite() {
        return Err(Error::NotPd);
    }
    Ok((SymMatrix::symmetrized(chol.inverse()), 2.0 * acc))
}

/// Squared radius `max_i (M⁺)_ii`.
pub fn squared_radius(m: &SymMatrix) -> Result<f64> {
    Ok(max_diagonal(&pinv(m)?))
}

pub(crate) fn max_diagonal(a: &SymMatrix) -> f64 {
    a.diagonal().into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// `Σ_{i,j} A_ij B_ij`.
pub fn frobenius_dot(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(a.0.dot(&b.0))
}
