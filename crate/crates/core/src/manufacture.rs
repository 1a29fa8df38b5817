//! Problems with known solutions: choose `X⋆` first, then build the data.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{mismatch, Error, Result};
use crate::fixpoint::{frechet_trace, PsiKind};
use crate::matcore::functional::LinearFunctional;
use crate::matcore::Mat;
use crate::problem::{QuasiLinearProblem, Term};
use crate::scalarnl::ScalarFn;

/// `D = AX⋆ + X⋆B + Σ fᵢ(X⋆) Cᵢ`, so that `X⋆` solves the problem.
pub fn manufacture_problem(a: Mat, b: Mat, terms: Vec<Term>, x_star: &Mat) -> Result<QuasiLinearProblem> {
    let n = a.rows();
    let m = b.rows();
    if x_star.shape() != (n, m) {
        return Err(mismatch("X⋆ must be n×m"));
    }
    let mut d = a.as_dmatrix() * x_star.as_dmatrix() + x_star.as_dmatrix() * b.as_dmatrix();
    for t in &terms {
        d += t.c.as_dmatrix() * t.f.evaluate(x_star)?;
    }
    let d = Mat::checked(d)?;
    QuasiLinearProblem::new(a, b, terms, d)
}

/// `M = X⋆ − f(X⋆) N` for `f = trace ∘ ψ`.
pub fn fixpoint_m(x_star: &Mat, n: &Mat, psi: PsiKind) -> Result<Mat> {
    if x_star.shape() != n.shape() {
        return Err(mismatch("X⋆ and N differ in shape"));
    }
    let f = psi.trace_value(x_star)?;
    Mat::checked(x_star.as_dmatrix() - n.as_dmatrix() * f)
}

/// `M = X⋆ − g(h(X⋆)) N`.
pub fn scalar_m(x_star: &Mat, n: &Mat, g: &ScalarFn, h: &LinearFunctional) -> Result<Mat> {
    let y = h.apply(x_star)?;
    if !g.contains(y) {
        return Err(Error::DomainExit { y });
    }
    Mat::checked(x_star.as_dmatrix() - n.as_dmatrix() * g.value(y))
}

/// `σ(α) = trace(N exp(−√α G))`, the contraction factor of the exp
/// iteration at `X⋆ = √α G`.
pub fn exp_sigma(g: &Mat, n: &Mat, alpha: f64) -> Result<f64> {
    frechet_trace(PsiKind::ExpNeg, &g.scale(alpha.sqrt()), n)
}

/// `α` with `σ(α) = target`, by bisection on `log α`.
///
/// For symmetric positive definite `G` and `N`, `σ` decreases from
/// `trace(N)` at `α = 0` to `0`; targets outside that range are rejected.
pub fn alpha_for_sigma(g: &Mat, n: &Mat, target: f64) -> Result<f64> {
    if !(target > 0.0) {
        return Err(Error::Unsupported("target σ must be positive".into()));
    }
    let (mut lo, mut hi) = (-30.0f64, 30.0f64);
    let s_lo = exp_sigma(g, n, lo.exp())?;
    if target >= s_lo {
        return Err(Error::Unsupported(alloc::format!(
            "σ = {target} exceeds the supremum {s_lo} for this (G, N)"
        )));
    }
    let s_hi = exp_sigma(g, n, hi.exp())?;
    if target <= s_hi {
        return Err(Error::Unsupported(alloc::format!("σ = {target} is below {s_hi}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if exp_sigma(g, n, mid.exp())? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Exp instance with prescribed contraction factor.
#[derive(Clone, Debug)]
pub struct ExpInstance {
    pub alpha: f64,
    pub sigma: f64,
    pub x_star: Mat,
    pub m: Mat,
    pub n: Mat,
}

/// `X⋆ = √α G` with `σ(α) = target` and `M = X⋆ − trace(exp(−X⋆)) N`.
pub fn exp_instance(g: &Mat, n: &Mat, target: f64) -> Result<ExpInstance> {
    let alpha = alpha_for_sigma(g, n, target)?;
    let x_star = g.scale(alpha.sqrt());
    let m = fixpoint_m(&x_star, n, PsiKind::ExpNeg)?;
    let sigma = exp_sigma(g, n, alpha)?;
    Ok(ExpInstance { alpha, sigma, x_star, m, n: n.clone() })
}
