//! Fixed-point iteration for `X = M + f(X) N` with `f(X) = trace(ψ(X))`.
//!
//! With `N = QΛQ⁻¹` and `X₁ = Q⁻¹XQ` the equation becomes
//! `X₁ = M₁ + f(X₁) Λ`: only the diagonal of `X₁` depends on `f`, so the
//! iteration `X₁⁽ᵏ⁺¹⁾ = M₁ + f(X₁⁽ᵏ⁾) Λ` touches diagonal entries only.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{mismatch, Error, Result};
use crate::matcore::eig::eig_general;
use crate::matcore::expm::expm;
use crate::matcore::mat::{fro, sym, trace_product};
use crate::matcore::sqrtm::SpdEigen;
use crate::matcore::Mat;

/// Condition number of `Q` above which the diagonalized mode falls back to
/// direct iteration.
pub const DIAG_MAX_COND_Q: f64 = 1e8;

/// The matrix function `ψ` in `f(X) = trace(ψ(X))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PsiKind {
    /// `exp(−X)`.
    ExpNeg,
    /// `X^{1/2}`, symmetric positive definite argument.
    Sqrt,
}

impl PsiKind {
    /// `ψ(X)`. The square root symmetrizes its argument first.
    pub fn apply(&self, x: &Mat) -> Result<Mat> {
        require_square(x)?;
        match self {
            PsiKind::ExpNeg => Mat::checked(expm(&(-x.as_dmatrix()))?),
            PsiKind::Sqrt => Ok(Mat::wrap(SpdEigen::new(&sym(x))?.map(|l| l.sqrt()))),
        }
    }

    /// `trace(ψ(X))`.
    pub fn trace_value(&self, x: &Mat) -> Result<f64> {
        require_square(x)?;
        psi_trace(*self, x.as_dmatrix())
    }
}

fn require_square(x: &Mat) -> Result<()> {
    if x.is_square() {
        Ok(())
    } else {
        Err(mismatch("trace(ψ(X)) needs a square matrix"))
    }
}

fn psi_trace(psi: PsiKind, x: &DMatrix<f64>) -> Result<f64> {
    match psi {
        PsiKind::ExpNeg => {
            let t = expm(&(-x))?.trace();
            if t.is_finite() {
                Ok(t)
            } else {
                Err(Error::NumericalOverflow)
            }
        }
        PsiKind::Sqrt => {
            let e = SpdEigen::new(&sym(x))?;
            Ok(e.values.iter().map(|l| l.sqrt()).sum())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IterationMode {
    /// Iterate on `X₁ = Q⁻¹XQ`, updating diagonal entries only.
    Diagonalized,
    /// `X⁽ᵏ⁺¹⁾ = M + f(X⁽ᵏ⁾) N`.
    Direct,
}

#[derive(Clone, Copy, Debug)]
pub struct IterateOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub mode: IterationMode,
}

impl Default for IterateOptions {
    fn default() -> Self {
        IterateOptions { tol: 1e-7, max_iter: 500, mode: IterationMode::Diagonalized }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// Residual below tolerance after this many iterations.
    Converged(usize),
    IterationCap,
    /// `f` overflowed or became non-finite.
    Diverged,
}

#[derive(Clone, Debug)]
pub struct IterationReport {
    /// Diagonal of `X₁⁽ᵏ⁾` for `k = 1, …, K` (of `X⁽ᵏ⁾` in direct mode).
    pub iterates_diag: Vec<Vec<f64>>,
    /// `f(X⁽ᵏ⁾)` for `k = 0, …, K`.
    pub f_values: Vec<f64>,
    /// `‖X⁽ᵏ⁾ − (M + f(X⁽ᵏ⁾)N)‖_F / ‖M‖_F` for `k = 1, …, K`.
    pub residuals: Vec<f64>,
    /// `‖X⁽ᵏ⁺¹⁾ − X⁽ᵏ⁾‖ / ‖X⁽ᵏ⁾ − X⁽ᵏ⁻¹⁾‖`, skipping zero denominators.
    pub contraction_ratios: Vec<f64>,
    pub termination: Termination,
    /// Geometric mean of the last (up to five) contraction ratios.
    pub sigma_estimate: f64,
    pub mode: IterationMode,
    /// Condition number of the eigenvector matrix when diagonalization ran.
    pub cond_q: Option<f64>,
    /// Why the diagonalized mode fell back to direct iteration.
    pub warning: Option<String>,
}

impl IterationReport {
    pub fn iterations(&self) -> usize {
        self.residuals.len()
    }

    pub fn converged(&self) -> bool {
        matches!(self.termination, Termination::Converged(_))
    }

    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }
}

/// Iteration state in whichever coordinates the mode uses.
enum Frame {
    Direct { m: DMatrix<f64>, n: DMatrix<f64> },
    Diag { m1: DMatrix<f64>, lambda: Vec<f64>, q: DMatrix<f64>, q_inv: DMatrix<f64>, orthogonal: bool },
}

impl Frame {
    fn iterate(&self, f: f64) -> DMatrix<f64> {
        match self {
            Frame::Direct { m, n } => m + n * f,
            Frame::Diag { m1, lambda, .. } => {
                let mut x1 = m1.clone();
                for (i, l) in lambda.iter().enumerate() {
                    x1[(i, i)] = m1[(i, i)] + f * l;
                }
                x1
            }
        }
    }

    fn original(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Frame::Direct { .. } => x.clone(),
            Frame::Diag { q, q_inv, .. } => q * x * q_inv,
        }
    }

    fn eval(&self, psi: PsiKind, x: &DMatrix<f64>) -> Result<f64> {
        match (self, psi) {
            (Frame::Diag { orthogonal: false, .. }, PsiKind::Sqrt) => {
                psi_trace(psi, &self.original(x))
            }
            _ => psi_trace(psi, x),
        }
    }
}

/// Runs the fixed-point iteration from `X⁽⁰⁾ = M`.
///
/// Returns the last iterate in original coordinates together with the
/// report. Hitting the iteration cap or diverging is reported through
/// [`IterationReport::termination`], not as an error. A square-root iterate
/// that leaves the SPD cone is an error.
pub fn iterate(m: &Mat, n: &Mat, psi: PsiKind, opts: IterateOptions) -> Result<(Mat, IterationReport)> {
    run(m, n, psi, opts, None)
}

/// As [`iterate`], also passing `(k, X⁽ᵏ⁾)` for `k = 0, 1, …` to `observe`,
/// in the coordinates the iteration runs in (`X₁ = Q⁻¹XQ` when
/// diagonalized).
pub fn iterate_observed(
    m: &Mat,
    n: &Mat,
    psi: PsiKind,
    opts: IterateOptions,
    mut observe: impl FnMut(usize, &Mat),
) -> Result<(Mat, IterationReport)> {
    run(m, n, psi, opts, Some(&mut observe))
}

fn run(
    m: &Mat,
    n: &Mat,
    psi: PsiKind,
    opts: IterateOptions,
    mut observe: Option<&mut dyn FnMut(usize, &Mat)>,
) -> Result<(Mat, IterationReport)> {
    if !m.is_square() || m.shape() != n.shape() {
        return Err(mismatch("M and N must be square and of equal size"));
    }
    let mut warning = None;
    let mut cond_q = None;
    let frame = match opts.mode {
        IterationMode::Direct => None,
        IterationMode::Diagonalized => match eig_general(n) {
            Ok(e) if e.cond_q <= DIAG_MAX_COND_Q => {
                cond_q = Some(e.cond_q);
                let (q, q_inv) = (e.q.into_dmatrix(), e.q_inv.into_dmatrix());
                let m1 = &q_inv * m.as_dmatrix() * &q;
                Some(Frame::Diag { m1, lambda: e.lambda, q, q_inv, orthogonal: e.orthogonal })
            }
            Ok(e) => {
                warning = Some(format!("cond(Q) = {:e} exceeds {DIAG_MAX_COND_Q:e}; iterating directly", e.cond_q));
                None
            }
            Err(err) => {
                warning = Some(format!("{err}; iterating directly"));
                None
            }
        },
    };
    let frame = frame.unwrap_or_else(|| Frame::Direct {
        m: m.as_dmatrix().clone(),
        n: n.as_dmatrix().clone(),
    });
    let mode = match frame {
        Frame::Direct { .. } => IterationMode::Direct,
        Frame::Diag { .. } => IterationMode::Diagonalized,
    };

    let m_norm = m.fro();
    let n_norm = n.fro();
    let res_scale = if m_norm > 0.0 { n_norm / m_norm } else { n_norm };

    let mut x = match &frame {
        Frame::Direct { m, .. } => m.clone(),
        Frame::Diag { m1, .. } => m1.clone(),
    };
    let mut f_values = Vec::new();
    let mut residuals = Vec::new();
    let mut iterates_diag = Vec::new();
    let mut termination = Termination::IterationCap;

    if let Some(obs) = observe.as_mut() {
        obs(0, &Mat::wrap(x.clone()));
    }
    match frame.eval(psi, &x) {
        Ok(f0) => f_values.push(f0),
        Err(Error::NumericalOverflow) => termination = Termination::Diverged,
        Err(e) => return Err(e),
    }
    if termination != Termination::Diverged {
        for k in 0..opts.max_iter {
            let f_prev = f_values[k];
            let next = frame.iterate(f_prev);
            let f_next = match frame.eval(psi, &next) {
                Ok(v) if v.is_finite() => v,
                Ok(_) | Err(Error::NumericalOverflow) => {
                    termination = Termination::Diverged;
                    break;
                }
                Err(e) => return Err(e),
            };
            x = next;
            if let Some(obs) = observe.as_mut() {
                obs(k + 1, &Mat::wrap(x.clone()));
            }
            iterates_diag.push((0..x.nrows()).map(|i| x[(i, i)]).collect());
            f_values.push(f_next);
            // X − (M + f(X)N) = (f_prev − f_next) N exactly
            let r = (f_next - f_prev).abs() * res_scale;
            residuals.push(r);
            if r < opts.tol {
                termination = Termination::Converged(k + 1);
                break;
            }
        }
    }

    let contraction_ratios = ratios(&f_values);
    let tail = &contraction_ratios[contraction_ratios.len().saturating_sub(5)..];
    let sigma_estimate = if tail.is_empty() {
        0.0
    } else {
        (tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64).exp()
    };
    let x_orig = Mat::checked(frame.original(&x))?;
    Ok((
        x_orig,
        IterationReport {
            iterates_diag,
            f_values,
            residuals,
            contraction_ratios,
            termination,
            sigma_estimate,
            mode,
            cond_q,
            warning,
        },
    ))
}

/// Successive iterate differences are `(f_k − f_{k−1}) N`, so norm ratios
/// reduce to ratios of `f` differences.
fn ratios(f: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 2..f.len() {
        let num = (f[k] - f[k - 1]).abs();
        let den = (f[k - 1] - f[k - 2]).abs();
        if den > 0.0 && num > 0.0 {
            out.push(num / den);
        }
    }
    out
}

/// Trace of the Fréchet derivative of `ψ` at `X` in the direction `E`.
///
/// * `ExpNeg`: `trace(E exp(−X))`. This is the integral formula without the
///   minus sign that differentiating `exp(−X)` produces; the true directional
///   derivative of `trace(exp(−X))` is its negative.
/// * `Sqrt`: `½ trace(X^{−1/2} E)`, the directional derivative of
///   `trace(X^{1/2})`.
pub fn frechet_trace(psi: PsiKind, x: &Mat, e: &Mat) -> Result<f64> {
    Ok(frechet_diagnostics(psi, x, e)?.value)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrechetDiagnostics {
    /// What [`frechet_trace`] returns.
    pub value: f64,
    /// `d/dt trace(ψ(X + tE))` at `t = 0`.
    pub derivative: f64,
    /// `½ trace(X⁻¹ E)` for `Sqrt` (operator with argument `X` rather than
    /// `X^{1/2}`); equal to `value` for `ExpNeg`.
    pub inverse_form: f64,
}

pub fn frechet_diagnostics(psi: PsiKind, x: &Mat, e: &Mat) -> Result<FrechetDiagnostics> {
    require_square(x)?;
    if e.shape() != x.shape() {
        return Err(mismatch("direction must have the shape of X"));
    }
    match psi {
        PsiKind::ExpNeg => {
            let ex = expm(&(-x.as_dmatrix()))?;
            let v = trace_product(e, &ex);
            Ok(FrechetDiagnostics { value: v, derivative: -v, inverse_form: v })
        }
        PsiKind::Sqrt => {
            let s = SpdEigen::new(&sym(x))?;
            let inv_half = s.map(|l| 1.0 / l.sqrt());
            let inv = s.map(|l| 1.0 / l);
            let v = 0.5 * trace_product(&inv_half, e);
            Ok(FrechetDiagnostics { value: v, derivative: v, inverse_form: 0.5 * trace_product(&inv, e) })
        }
    }
}

/// Central difference `(f(X + hE) − f(X − hE)) / 2h` of `f = trace ∘ ψ` with
/// `h = 1e-5 ‖X‖_F / ‖E‖_F`.
pub fn finite_difference_trace(psi: PsiKind, x: &Mat, e: &Mat) -> Result<f64> {
    require_square(x)?;
    let en = e.fro();
    if en == 0.0 {
        return Ok(0.0);
    }
    let h = 1e-5 * x.fro().max(f64::MIN_POSITIVE) / en;
    let xp = x.as_dmatrix() + e.as_dmatrix() * h;
    let xm = x.as_dmatrix() - e.as_dmatrix() * h;
    Ok((psi_trace(psi, &xp)? - psi_trace(psi, &xm)?) / (2.0 * h))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Prediction {
    Contract,
    NoGuarantee,
}

/// `σ = |frechet_trace(ψ, X_ref, N)|`; the iteration contracts near the
/// solution when `σ < 1`.
pub fn convergence_predicate(x_ref: &Mat, n: &Mat, psi: PsiKind) -> Result<(f64, Prediction)> {
    let sigma = frechet_trace(psi, x_ref, n)?.abs();
    let p = if sigma < 1.0 { Prediction::Contract } else { Prediction::NoGuarantee };
    Ok((sigma, p))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monotonicity {
    MonotoneIncreasing,
    Alternating,
    Irregular,
}

/// Classifies the signs of successive `f` differences. Differences at
/// round-off level are ignored.
pub fn classify_monotonicity(report: &IterationReport) -> Result<Monotonicity> {
    const NEED: usize = 4;
    if report.iterations() < NEED {
        return Err(Error::TooFewIterations { have: report.iterations(), need: NEED });
    }
    let f = &report.f_values;
    let signs: Vec<f64> = (1..f.len())
        .filter_map(|k| {
            let d = f[k] - f[k - 1];
            if d.abs() <= 1e-14 * (1.0 + f[k].abs()) {
                None
            } else {
                Some(d.signum())
            }
        })
        .collect();
    if signs.is_empty() {
        return Ok(Monotonicity::Irregular);
    }
    if signs.iter().all(|&s| s > 0.0) {
        return Ok(Monotonicity::MonotoneIncreasing);
    }
    if signs.len() >= 2 && signs.windows(2).all(|w| w[0] != w[1]) {
        return Ok(Monotonicity::Alternating);
    }
    Ok(Monotonicity::Irregular)
}

/// Relative residual `‖X − M − f(X)N‖_F / ‖M‖_F` in original coordinates.
pub fn reduced_residual(m: &Mat, n: &Mat, psi: PsiKind, x: &Mat) -> Result<f64> {
    let fx = psi.trace_value(x)?;
    let r = fro(&(x.as_dmatrix() - m.as_dmatrix() - n.as_dmatrix() * fx));
    let mn = m.fro();
    Ok(if mn > 0.0 { r / mn } else { r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn spd(n: usize, shift: f64) -> Mat {
        let g = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.3 - 0.5);
        Mat::new(g.transpose() * &g + DMatrix::identity(n, n) * shift).unwrap()
    }

    #[test]
    fn zero_n_converges_in_one_step() {
        let m = spd(4, 1.0);
        let (x, r) = iterate(&m, &Mat::zeros(4, 4), PsiKind::ExpNeg, IterateOptions::default()).unwrap();
        assert_eq!(r.termination, Termination::Converged(1));
        assert_eq!(x.as_dmatrix(), m.as_dmatrix());
        assert_eq!(r.f_values.len(), 2);
        assert_eq!(
            classify_monotonicity(&r),
            Err(Error::TooFewIterations { have: 1, need: 4 })
        );
    }

    #[test]
    fn frechet_trivial_cases() {
        let e = Mat::from_row_major(2, 2, vec![1.0, 2.0, -3.0, 5.0]).unwrap();
        let v = frechet_trace(PsiKind::ExpNeg, &Mat::zeros(2, 2), &e).unwrap();
        assert!((v - 6.0).abs() < 1e-15);
        let v = frechet_trace(PsiKind::Sqrt, &Mat::identity(2), &e).unwrap();
        assert!((v - 3.0).abs() < 1e-15);
    }

    #[test]
    fn frechet_matches_finite_differences() {
        let x = spd(5, 0.5);
        let e = Mat::new(sym(&DMatrix::from_fn(5, 5, |i, j| (i as f64 - j as f64 * 0.5).sin()))).unwrap();
        for psi in [PsiKind::ExpNeg, PsiKind::Sqrt] {
            let d = frechet_diagnostics(psi, &x, &e).unwrap();
            let fd = finite_difference_trace(psi, &x, &e).unwrap();
            assert!((d.derivative - fd).abs() <= 1e-6 * fd.abs().max(1e-3), "{psi:?}");
        }
    }

    #[test]
    fn modes_agree_and_freeze_off_diagonals() {
        let n = spd(4, 0.2).scale(0.05);
        let x_star = spd(4, 2.0);
        let f = PsiKind::ExpNeg.trace_value(&x_star).unwrap();
        let m = x_star.axpy(-f, &n);
        let (xd, rd) = iterate(&m, &n, PsiKind::ExpNeg, IterateOptions::default()).unwrap();
        let opts = IterateOptions { mode: IterationMode::Direct, ..Default::default() };
        let (xs, rs) = iterate(&m, &n, PsiKind::ExpNeg, opts).unwrap();
        assert!(rd.converged() && rs.converged());
        assert_eq!(rd.mode, IterationMode::Diagonalized);
        assert!(fro(&(xd.as_dmatrix() - xs.as_dmatrix())) < 1e-10);
        assert!(fro(&(xd.as_dmatrix() - x_star.as_dmatrix())) < 1e-6 * x_star.fro());
        let mut m1 = None;
        iterate_observed(&m, &n, PsiKind::ExpNeg, IterateOptions::default(), |k, x1| {
            let m1 = m1.get_or_insert_with(|| x1.clone());
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        assert_eq!(x1[(i, j)].to_bits(), m1[(i, j)].to_bits(), "k = {k}");
                    }
                }
            }
        })
        .unwrap();
    }

    #[test]
    fn non_diagonalizable_falls_back() {
        let n = Mat::from_row_major(2, 2, vec![0.1, 1.0, 0.0, 0.1]).unwrap();
        let m = Mat::identity(2);
        let (_, r) = iterate(&m, &n, PsiKind::ExpNeg, IterateOptions::default()).unwrap();
        assert_eq!(r.mode, IterationMode::Direct);
        assert!(r.warning.is_some());
    }
}
