//! Vectorized dense oracle for linear quasi-linear problems.
//!
//! `vec(AX + XB) = (I ⊗ A + Bᵀ ⊗ I) vec(X)` and
//! `trace(HX) = vec(Hᵀ)ᵀ vec(X)`, so a problem with linear functionals is a
//! single `nm × nm` linear system. Cost is `O(n³m³)`; meant for checking.

use alloc::format;

use nalgebra::{DMatrix, DVector};

use super::functional::LinearFunctional;
use super::mat::Mat;
use crate::error::{mismatch, Error, Result};
use crate::problem::QuasiLinearProblem;
use crate::EPS;

/// Largest `n·m` accepted by the oracle.
pub const KRON_MAX_UNKNOWNS: usize = 400;

/// `G = I_m ⊗ A + Bᵀ ⊗ I_n`.
pub fn sylvester_kron(a: &Mat, b: &Mat) -> DMatrix<f64> {
    let n = a.rows();
    let m = b.rows();
    let mut g = DMatrix::zeros(n * m, n * m);
    for blk in 0..m {
        for i in 0..n {
            for j in 0..n {
                g[(blk * n + i, blk * n + j)] += a[(i, j)];
            }
        }
    }
    for p in 0..m {
        for q in 0..m {
            let bqp = b[(q, p)];
            if bqp != 0.0 {
                for i in 0..n {
                    g[(p * n + i, q * n + i)] += bqp;
                }
            }
        }
    }
    g
}

/// Row vector `h` with `hᵀ vec(X) = f(X)`.
pub fn functional_row(f: &LinearFunctional, n: usize, m: usize) -> Result<DVector<f64>> {
    let h = f.to_matrix(n, m)?;
    // f(X) = Σ_{p,q} H[p,q] X[q,p], X[q,p] sits at q + p·n
    let mut row = DVector::zeros(n * m);
    for p in 0..m {
        for q in 0..n {
            row[q + p * n] = h[(p, q)];
        }
    }
    Ok(row)
}

fn vec_of(x: &Mat) -> DVector<f64> {
    DVector::from_column_slice(x.as_slice())
}

fn unvec(v: &DVector<f64>, n: usize, m: usize) -> Result<Mat> {
    Mat::checked(DMatrix::from_column_slice(n, m, v.as_slice()))
}

fn dense_solve(k: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = k.lu();
    let u = lu.u();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..u.nrows() {
        let d = u[(i, i)].abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if u.nrows() > 0 && (hi == 0.0 || lo <= 1e3 * EPS * hi) {
        return Err(Error::SingularOperator);
    }
    lu.solve(rhs).ok_or(Error::SingularOperator)
}

/// Solves a problem whose functionals are all linear through the full
/// vectorized system.
pub fn kron_solve(problem: &QuasiLinearProblem) -> Result<Mat> {
    problem.validate()?;
    let n = problem.n();
    let m = problem.m();
    if n * m > KRON_MAX_UNKNOWNS {
        return Err(mismatch(format!(
            "oracle limited to n·m ≤ {KRON_MAX_UNKNOWNS}, got {}",
            n * m
        )));
    }
    let mut k = sylvester_kron(&problem.a, &problem.b);
    for t in &problem.terms {
        let h = t
            .f
            .as_linear()
            .ok_or_else(|| Error::Unsupported("kron_solve needs linear functionals".into()))?;
        let row = functional_row(h, n, m)?;
        let col = vec_of(&t.c);
        k += &col * row.transpose();
    }
    let x = dense_solve(k, &vec_of(&problem.d))?;
    unvec(&x, n, m)
}

/// Rank-one problem `AX + XB + (uᵀXu) vvᵀ = D` through the Sherman–Morrison
/// formula on `G + 𝒱𝒰ᵀ` with `𝒰 = u⊗u`, `𝒱 = v⊗v`.
///
/// Returns `X` and `σ = (1 + 𝒰ᵀG⁻¹𝒱)⁻¹ 𝒰ᵀG⁻¹d`, the coefficient with
/// `vec(X) = G⁻¹d − σ G⁻¹𝒱`.
pub fn smw_rank_one(a: &Mat, b: &Mat, u: &[f64], v: &[f64], d: &Mat) -> Result<(Mat, f64)> {
    let n = a.rows();
    if b.rows() != n || u.len() != n || v.len() != n || d.shape() != (n, n) {
        return Err(mismatch("rank-one SMW path needs square problems with |u| = |v| = n"));
    }
    if n * n > KRON_MAX_UNKNOWNS {
        return Err(mismatch("oracle size exceeded"));
    }
    let uu = DVector::from_fn(n * n, |k, _| u[k / n] * u[k % n]);
    let vv = DVector::from_fn(n * n, |k, _| v[k / n] * v[k % n]);
    let g = sylvester_kron(a, b);
    let lu = g.lu();
    let gd = lu.solve(&vec_of(d)).ok_or(Error::SingularOperator)?;
    let gv = lu.solve(&vv).ok_or(Error::SingularOperator)?;
    let denom = 1.0 + uu.dot(&gv);
    if denom.abs() <= 1e-14 {
        return Err(Error::SingularMatrix("1 + UᵀG⁻¹V vanishes"));
    }
    let sigma = uu.dot(&gd) / denom;
    let x = &gd - &gv * sigma;
    Ok((unvec(&x, n, n)?, sigma))
}
