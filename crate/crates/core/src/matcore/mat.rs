use alloc::format;
use alloc::vec::Vec;
use core::ops::Deref;

use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{mismatch, Error, Result};

/// Dense real matrix with finite entries.
///
/// Storage is a [`DMatrix`]; read access goes through `Deref`. Construction
/// from outside the crate checks that every entry is finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat(DMatrix<f64>);

impl Mat {
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(mismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, &entries))
    }

    pub fn from_column_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(mismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Self::new(DMatrix::from_column_slice(rows, cols, entries))
    }

    /// Wraps `m` after checking that all entries are finite.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if !m[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Mat(m))
    }

    /// Internal results whose finiteness follows from finite inputs.
    pub(crate) fn wrap(m: DMatrix<f64>) -> Self {
        Mat(m)
    }

    /// Like [`Mat::wrap`] but reports overflow instead of storing it.
    pub(crate) fn checked(m: DMatrix<f64>) -> Result<Self> {
        if m.iter().all(|v| v.is_finite()) {
            Ok(Mat(m))
        } else {
            Err(Error::NumericalOverflow)
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Mat(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        Self::new(m)
    }

    /// `u vᵀ`.
    pub fn outer(u: &[f64], v: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j]))
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.0.nrows() == self.0.ncols()
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.0.len());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn fro(&self) -> f64 {
        fro(&self.0)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn transpose(&self) -> Mat {
        Mat(self.0.transpose())
    }

    /// `(X + Xᵀ)/2`.
    pub fn symmetrized(&self) -> Mat {
        Mat(sym(&self.0))
    }

    /// True when `‖X − Xᵀ‖_F ≤ tol·‖X‖_F`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square() && fro(&(&self.0 - self.0.transpose())) <= tol * self.fro()
    }

    pub fn scale(&self, alpha: f64) -> Mat {
        Mat(&self.0 * alpha)
    }

    /// `self + alpha·other`.
    pub fn axpy(&self, alpha: f64, other: &Mat) -> Mat {
        Mat(&self.0 + &other.0 * alpha)
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols() != other.rows() {
            return Err(mismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        Ok(Mat(&self.0 * &other.0))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let k = self.rows().min(self.cols());
        (0..k).map(|i| self.0[(i, i)]).collect()
    }

    /// Eigenvalues of `(X + Xᵀ)/2` in ascending order.
    pub fn symmetric_eigenvalues(&self) -> Result<Vec<f64>> {
        if !self.is_square() {
            return Err(mismatch("eigenvalues need a square matrix"));
        }
        let mut v: Vec<f64> = nalgebra::SymmetricEigen::new(sym(&self.0)).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        Ok(v)
    }
}

impl Deref for Mat {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Complex matrix stored as a pair of real matrices of equal shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMat {
    pub re: Mat,
    pub im: Mat,
}

impl ComplexMat {
    pub fn new(re: Mat, im: Mat) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(mismatch("real and imaginary parts differ in shape"));
        }
        Ok(ComplexMat { re, im })
    }

    pub fn from_complex(m: &DMatrix<Complex64>) -> Result<Self> {
        let re = Mat::new(m.map(|z| z.re))?;
        let im = Mat::new(m.map(|z| z.im))?;
        Ok(ComplexMat { re, im })
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.re.rows(), self.re.cols(), |i, j| {
            Complex64::new(self.re[(i, j)], self.im[(i, j)])
        })
    }

    pub fn conj(&self) -> ComplexMat {
        ComplexMat { re: self.re.clone(), im: self.im.scale(-1.0) }
    }

    pub fn fro(&self) -> f64 {
        let a = self.re.fro();
        let b = self.im.fro();
        a.hypot(b)
    }
}

pub(crate) fn fro(m: &DMatrix<f64>) -> f64 {
    // scaled sum of squares; entries may be large
    let amax = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if amax == 0.0 || !amax.is_finite() {
        return amax;
    }
    let s: f64 = m.iter().map(|v| (v / amax) * (v / amax)).sum();
    amax * s.sqrt()
}

pub(crate) fn fro_c(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Induced 1-norm (max column sum).
pub(crate) fn norm1(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub(crate) fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    // trace(AB) without forming AB
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}
