//! Real diagonalization `N = Q Λ Q⁻¹`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use super::mat::{fro, sym, Mat};
use super::schur::RealSchur;
use crate::error::{mismatch, Error, Result};
use crate::EPS;

/// Largest accepted condition number of the eigenvector matrix.
pub const MAX_COND_Q: f64 = 1e12;

#[derive(Clone, Debug)]
pub struct EigResult {
    /// Eigenvectors as columns, unit 2-norm.
    pub q: Mat,
    pub q_inv: Mat,
    pub lambda: Vec<f64>,
    /// `‖Q‖₂ ‖Q⁻¹‖₂`.
    pub cond_q: f64,
    /// `Q` came from the symmetric path and `Q⁻¹ = Qᵀ`.
    pub orthogonal: bool,
}

/// Eigendecomposition with real eigenvalues.
///
/// Symmetric input goes through the symmetric eigensolver; anything else
/// through the real Schur form and triangular back-substitution. Complex
/// eigenvalues or an ill-conditioned eigenvector basis give
/// [`Error::NotDiagonalizable`].
pub fn eig_general(n: &Mat) -> Result<EigResult> {
    if !n.is_square() {
        return Err(mismatch("eigendecomposition needs a square matrix"));
    }
    let dim = n.rows();
    let nn = n.as_dmatrix();
    let norm = fro(nn);
    if fro(&(nn - nn.transpose())) <= 1e-14 * norm {
        let se = SymmetricEigen::new(sym(nn));
        let q = se.eigenvectors;
        let q_inv = q.transpose();
        let cond_q = cond2(&q);
        return Ok(EigResult {
            q: Mat::wrap(q),
            q_inv: Mat::wrap(q_inv),
            lambda: se.eigenvalues.iter().cloned().collect(),
            cond_q,
            orthogonal: true,
        });
    }

    let schur = RealSchur::new(nn)?;
    if schur.has_complex_pairs() {
        return Err(Error::NotDiagonalizable("complex eigenvalues".into()));
    }
    let t = &schur.t;
    let lambda: Vec<f64> = (0..dim).map(|i| t[(i, i)]).collect();
    let small = EPS * fro(t).max(f64::MIN_POSITIVE);

    // eigenvectors of the triangular factor
    let mut w = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..dim {
        w[(k, k)] = 1.0;
        for i in (0..k).rev() {
            let mut acc = 0.0;
            for j in (i + 1)..=k {
                acc += t[(i, j)] * w[(j, k)];
            }
            let mut denom = t[(i, i)] - lambda[k];
            if denom.abs() < small {
                denom = if denom < 0.0 { -small } else { small };
            }
            w[(i, k)] = -acc / denom;
        }
    }
    let mut q = &schur.q * w;
    for k in 0..dim {
        let c = q.column(k).norm();
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::NotDiagonalizable("eigenvector overflow".into()));
        }
        q.column_mut(k).scale_mut(1.0 / c);
    }
    let cond_q = cond2(&q);
    if !(cond_q <= MAX_COND_Q) {
        return Err(Error::NotDiagonalizable(format!("cond(Q) = {cond_q:e}")));
    }
    let q_inv = q
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotDiagonalizable("singular eigenvector matrix".into()))?;
    let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&lambda));
    let resid = fro(&(nn * &q - &q * lam));
    if resid > 1e-9 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::NotDiagonalizable(format!("eigenvector residual {resid:e}")));
    }
    Ok(EigResult { q: Mat::wrap(q), q_inv: Mat::wrap(q_inv), lambda, cond_q, orthogonal: false })
}

/// 2-norm condition number from the singular values.
pub(crate) fn cond2(q: &DMatrix<f64>) -> f64 {
    if q.nrows() == 0 {
        return 1.0;
    }
    let sv = q.clone().singular_values();
    let hi = sv.iter().cloned().fold(0.0, f64::max);
    let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}
