//! Scalar-valued functions of a matrix.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::mat::{trace_product, Mat};
use crate::error::{mismatch, Error, Result};
use crate::fixpoint::PsiKind;
use crate::scalarnl::ScalarFn;

/// Linear functional `f(X) = trace(HX)`.
#[derive(Clone, Debug, PartialEq)]
pub enum LinearFunctional {
    /// `H = I`, i.e. `trace(X)` for square `X`.
    Identity,
    /// `H = u vᵀ`, evaluated as `vᵀ X u` (`u` has `m` entries, `v` has `n`).
    RankOne { u: Vec<f64>, v: Vec<f64> },
    /// Explicit `m × n` matrix `H`.
    Dense(Mat),
}

impl LinearFunctional {
    /// `trace(HX)`; never forms `HX`.
    pub fn apply(&self, x: &Mat) -> Result<f64> {
        self.check(x.rows(), x.cols())?;
        Ok(self.apply_unchecked(x.as_dmatrix()))
    }

    pub(crate) fn apply_unchecked(&self, x: &DMatrix<f64>) -> f64 {
        match self {
            LinearFunctional::Identity => x.trace(),
            LinearFunctional::RankOne { u, v } => {
                let mut acc = 0.0;
                for (i, vi) in v.iter().enumerate() {
                    let mut row = 0.0;
                    for (j, uj) in u.iter().enumerate() {
                        row += x[(i, j)] * uj;
                    }
                    acc += vi * row;
                }
                acc
            }
            LinearFunctional::Dense(h) => trace_product(h, x),
        }
    }

    /// Validates the functional against an `rows × cols` argument.
    pub fn check(&self, rows: usize, cols: usize) -> Result<()> {
        match self {
            LinearFunctional::Identity if rows != cols => {
                Err(mismatch(format!("trace needs a square argument, got {rows}x{cols}")))
            }
            LinearFunctional::RankOne { u, v } if u.len() != cols || v.len() != rows => {
                Err(mismatch(format!(
                    "rank-one functional with |u|={}, |v|={} applied to {rows}x{cols}",
                    u.len(),
                    v.len()
                )))
            }
            LinearFunctional::Dense(h) if h.rows() != cols || h.cols() != rows => {
                Err(mismatch(format!(
                    "H is {}x{} but X is {rows}x{cols}",
                    h.rows(),
                    h.cols()
                )))
            }
            _ => Ok(()),
        }
    }

    /// The matrix `H` (`cols × rows` for an `rows × cols` argument).
    pub fn to_matrix(&self, rows: usize, cols: usize) -> Result<Mat> {
        self.check(rows, cols)?;
        Ok(match self {
            LinearFunctional::Identity => Mat::identity(rows),
            LinearFunctional::RankOne { u, v } => Mat::outer(u, v)?,
            LinearFunctional::Dense(h) => h.clone(),
        })
    }
}

/// `trace(HX)` for the given `H`.
pub fn trace_functional(h: &LinearFunctional, x: &Mat) -> Result<f64> {
    h.apply(x)
}

/// Tagged description of the scalar function `f` in `f(X) C`.
#[derive(Clone, Debug)]
pub enum FunctionalSpec {
    Linear(LinearFunctional),
    /// `trace(X^p)`.
    PowerTrace(u32),
    /// `trace(X⁻¹)`.
    InverseTrace,
    /// `‖X‖²_F = trace(XᵀX)`.
    FrobeniusSq,
    /// `trace(ψ(X))`.
    TracePsi(PsiKind),
    /// `g(h(X))` with linear `h`.
    GOfLinear { g: ScalarFn, h: LinearFunctional },
}

impl FunctionalSpec {
    pub fn trace() -> Self {
        FunctionalSpec::Linear(LinearFunctional::Identity)
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, FunctionalSpec::Linear(_))
    }

    pub fn as_linear(&self) -> Option<&LinearFunctional> {
        match self {
            FunctionalSpec::Linear(h) => Some(h),
            _ => None,
        }
    }

    /// Evaluates `f(X)`.
    pub fn evaluate(&self, x: &Mat) -> Result<f64> {
        match self {
            FunctionalSpec::Linear(h) => h.apply(x),
            FunctionalSpec::PowerTrace(p) => {
                require_square(x)?;
                Ok(matrix_power(x.as_dmatrix(), *p).trace())
            }
            FunctionalSpec::InverseTrace => {
                require_square(x)?;
                let inv = x
                    .as_dmatrix()
                    .clone()
                    .try_inverse()
                    .ok_or(Error::SingularMatrix("trace(X^-1) of a singular matrix"))?;
                Ok(inv.trace())
            }
            FunctionalSpec::FrobeniusSq => {
                let n = x.fro();
                Ok(n * n)
            }
            FunctionalSpec::TracePsi(psi) => psi.trace_value(x),
            FunctionalSpec::GOfLinear { g, h } => {
                let y = h.apply(x)?;
                if !g.contains(y) {
                    return Err(Error::DomainExit { y });
                }
                Ok(g.value(y))
            }
        }
    }
}

fn require_square(x: &Mat) -> Result<()> {
    if x.is_square() {
        Ok(())
    } else {
        Err(mismatch(format!("functional needs a square argument, got {}x{}", x.rows(), x.cols())))
    }
}

/// `X^p` by repeated squaring.
pub(crate) fn matrix_power<T>(x: &DMatrix<T>, mut p: u32) -> DMatrix<T>
where
    T: nalgebra::Scalar + num_traits::Zero + num_traits::One + nalgebra::ClosedAddAssign + nalgebra::ClosedMulAssign,
{
    let n = x.nrows();
    let mut result = DMatrix::<T>::identity(n, n);
    let mut base = x.clone();
    while p > 0 {
        if p & 1 == 1 {
            result = &result * &base;
        }
        p >>= 1;
        if p > 0 {
            base = &base * &base;
        }
    }
    result
}
