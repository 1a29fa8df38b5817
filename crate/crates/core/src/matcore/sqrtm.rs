//! Functions of symmetric positive definite matrices through the symmetric
//! eigendecomposition `X = V Λ Vᵀ`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;

use super::mat::{fro, sym, Mat};
use crate::error::{mismatch, Error, Result};

/// Eigenvalues must exceed this multiple of `‖X‖₂`.
pub const SPD_RELATIVE_TOL: f64 = 1e-12;

/// Symmetry tolerance (relative, Frobenius) accepted as "symmetric input".
pub(crate) const SYMMETRY_TOL: f64 = 1e-10;

/// Checked eigendecomposition of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct SpdEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SpdEigen {
    pub fn new(x: &DMatrix<f64>) -> Result<Self> {
        if !x.is_square() {
            return Err(mismatch("SPD functions need a square matrix"));
        }
        if fro(&(x - x.transpose())) > SYMMETRY_TOL * fro(x) {
            return Err(Error::NotSymmetric);
        }
        let se = SymmetricEigen::new(sym(x));
        let norm2 = se.eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()));
        let min_eig = se.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if x.nrows() > 0 && (min_eig <= SPD_RELATIVE_TOL * norm2 || norm2 == 0.0) {
            return Err(Error::NotSpd { min_eig });
        }
        Ok(SpdEigen { values: se.eigenvalues, vectors: se.eigenvectors })
    }

    /// `V φ(Λ) Vᵀ`, symmetrized.
    pub fn map(&self, phi: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let v = &self.vectors;
        let mut scaled = v.clone();
        for (j, &l) in self.values.iter().enumerate() {
            let s = phi(l);
            for i in 0..v.nrows() {
                scaled[(i, j)] *= s;
            }
        }
        sym(&(scaled * v.transpose()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Principal square root of a symmetric positive definite matrix.
pub fn mat_sqrt(x: &Mat) -> Result<Mat> {
    let e = SpdEigen::new(x)?;
    Ok(Mat::wrap(e.map(|l| l.sqrt())))
}

/// `X^{-1/2}` for symmetric positive definite `X`.
pub fn mat_inv_sqrt(x: &Mat) -> Result<Mat> {
    let e = SpdEigen::new(x)?;
    Ok(Mat::wrap(e.map(|l| 1.0 / l.sqrt())))
}

/// True when `x` is symmetric and numerically positive definite.
pub fn is_spd(x: &Mat) -> bool {
    SpdEigen::new(x).is_ok()
}
