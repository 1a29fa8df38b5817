//! Closed-form solutions for linear `f`.
//!
//! For `f(X) = trace(HX)` applying `f` to `X = M + f(X) N` gives
//! `f(X) (1 − f(N)) = f(M)`, so `X = M + σN` with `σ = f(M) / (1 − f(N))`.
//! With `ℓ` linear terms the scalars solve `(I − F)σ = f` where
//! `F_ji = f_j(N_i)` and `f_j = f_j(M)`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{mismatch, Error, Result};
use crate::matcore::functional::{FunctionalSpec, LinearFunctional};
use crate::matcore::mat::{fro, norm1};
use crate::matcore::sylvester::SylvesterOperator;
use crate::matcore::Mat;
use crate::problem::{QuasiLinearProblem, ReducedProblem, Term};

/// Relative size of `1 − f(N)` (or of a singular value of `I − F`) below
/// which the small system is treated as singular.
pub const SINGULAR_REL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub enum Outcome {
    /// `X` and `σᵢ = fᵢ(X)`.
    Unique { x: Mat, sigma: Vec<f64> },
    /// Every `X = base + Σ tₖ directions[k]` solves the equation.
    NonUniqueFamily { base: Mat, directions: Vec<Mat> },
    NoSolution,
}

#[derive(Clone, Debug, Default)]
pub struct Diagnostics {
    /// `F` with `F[j][i] = f_j(N_i)`.
    pub f_matrix: Vec<Vec<f64>>,
    /// `f_j(M)`.
    pub f_rhs: Vec<f64>,
    /// `‖F‖₁`.
    pub f_norm1: f64,
    /// `‖F‖₁ < 1`, sufficient for `I − F` to be nonsingular.
    pub norm_condition: bool,
    /// Smallest singular value of `I − F`.
    pub min_singular_value: f64,
    /// Singular-value threshold used for the rank decision.
    pub singular_threshold: f64,
    /// Relative residual of the unique solution, or the largest residual of
    /// the sampled family members.
    pub relative_residual: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct LinearOutcome {
    pub outcome: Outcome,
    pub diagnostics: Diagnostics,
}

impl LinearOutcome {
    pub fn unique(&self) -> Option<(&Mat, &[f64])> {
        match &self.outcome {
            Outcome::Unique { x, sigma } => Some((x, sigma)),
            _ => None,
        }
    }

    /// The solution, or an error naming the degenerate case.
    pub fn into_unique(self) -> Result<(Mat, Vec<f64>)> {
        match self.outcome {
            Outcome::Unique { x, sigma } => Ok((x, sigma)),
            Outcome::NonUniqueFamily { .. } => Err(Error::NonUniqueSolution),
            Outcome::NoSolution => Err(Error::NoSolution),
        }
    }
}

fn linear_terms(terms: &[Term]) -> Result<Vec<&LinearFunctional>> {
    terms
        .iter()
        .map(|t| {
            t.f.as_linear()
                .ok_or_else(|| Error::Unsupported("linear solver needs linear functionals".into()))
        })
        .collect()
}

/// Single linear term.
pub fn solve_single(problem: &QuasiLinearProblem) -> Result<LinearOutcome> {
    if problem.terms.len() != 1 {
        return Err(mismatch("solve_single expects exactly one term"));
    }
    problem.validate()?;
    let h = linear_terms(&problem.terms)?[0];
    let red = problem.reduce()?;
    let m = &red.m;
    let n = &red.terms[0].c;
    let fm = h.apply(m)?;
    let fn_ = h.apply(n)?;
    let denom = 1.0 - fn_;
    let eps = SINGULAR_REL * (1.0 + fn_.abs());
    let mut diag = Diagnostics {
        f_matrix: alloc::vec![alloc::vec![fn_]],
        f_rhs: alloc::vec![fm],
        f_norm1: fn_.abs(),
        norm_condition: fn_.abs() < 1.0,
        min_singular_value: denom.abs(),
        singular_threshold: eps,
        relative_residual: None,
    };
    let outcome = if denom.abs() <= eps {
        if fm.abs() <= eps * m.fro() {
            Outcome::NonUniqueFamily { base: m.clone(), directions: alloc::vec![n.clone()] }
        } else {
            Outcome::NoSolution
        }
    } else {
        let sigma = fm / denom;
        let x = Mat::checked(m.as_dmatrix() + n.as_dmatrix() * sigma)?;
        Outcome::Unique { x, sigma: alloc::vec![sigma] }
    };
    diag.relative_residual = check_outcome(problem, &outcome)?;
    Ok(LinearOutcome { outcome, diagnostics: diag })
}

/// Any number of linear terms.
pub fn solve_multi(problem: &QuasiLinearProblem) -> Result<LinearOutcome> {
    problem.validate()?;
    linear_terms(&problem.terms)?;
    let red = problem.reduce()?;
    let mut out = solve_reduced(&red)?;
    out.diagnostics.relative_residual = check_outcome(problem, &out.outcome)?;
    Ok(out)
}

/// `X = M + Σ fᵢ(X) Nᵢ` with linear `fᵢ`, solved through `(I − F)σ = f`.
///
/// The residual recorded in the diagnostics is that of the reduced equation
/// relative to `‖M‖_F + Σ|σᵢ|‖Nᵢ‖_F`.
pub fn solve_reduced(red: &ReducedProblem) -> Result<LinearOutcome> {
    let hs = linear_terms(&red.terms)?;
    let l = hs.len();
    let m = &red.m;
    if l == 0 {
        let diag = Diagnostics { norm_condition: true, relative_residual: Some(0.0), ..Default::default() };
        return Ok(LinearOutcome { outcome: Outcome::Unique { x: m.clone(), sigma: Vec::new() }, diagnostics: diag });
    }
    let mut f = DMatrix::<f64>::zeros(l, l);
    let mut rhs = DVector::<f64>::zeros(l);
    for (j, h) in hs.iter().enumerate() {
        rhs[j] = h.apply(m)?;
        for (i, t) in red.terms.iter().enumerate() {
            f[(j, i)] = h.apply(&t.c)?;
        }
    }
    let k = DMatrix::<f64>::identity(l, l) - &f;
    let svd = k.clone().svd(true, true);
    let smin = svd.singular_values.min();
    let eps = SINGULAR_REL * (1.0 + f.norm());
    let f_norm1 = norm1(&f);
    let mut diag = Diagnostics {
        f_matrix: (0..l).map(|j| (0..l).map(|i| f[(j, i)]).collect()).collect(),
        f_rhs: rhs.iter().copied().collect(),
        f_norm1,
        norm_condition: f_norm1 < 1.0,
        min_singular_value: smin,
        singular_threshold: eps,
        relative_residual: None,
    };
    let combine = |coef: &[f64]| -> Result<Mat> {
        let mut x = m.as_dmatrix().clone();
        for (c, t) in coef.iter().zip(&red.terms) {
            x += t.c.as_dmatrix() * *c;
        }
        Mat::checked(x)
    };

    let outcome = if smin > eps {
        let sigma = k.lu().solve(&rhs).ok_or(Error::SingularSmallSystem)?;
        let sigma: Vec<f64> = sigma.iter().copied().collect();
        Outcome::Unique { x: combine(&sigma)?, sigma }
    } else {
        let u = svd.u.as_ref().ok_or(Error::SingularSmallSystem)?;
        let vt = svd.v_t.as_ref().ok_or(Error::SingularSmallSystem)?;
        // particular solution from the pseudo-inverse, consistency from the
        // component of the right side outside range(I − F)
        let mut sigma_p = DVector::<f64>::zeros(l);
        let mut inconsistency = 0.0f64;
        let mut null = Vec::new();
        for s in 0..l {
            let sv = svd.singular_values[s];
            let c = u.column(s).dot(&rhs);
            if sv > eps {
                sigma_p += vt.row(s).transpose() * (c / sv);
            } else {
                inconsistency = inconsistency.hypot(c);
                null.push(vt.row(s).transpose());
            }
        }
        if inconsistency > eps * m.fro() {
            Outcome::NoSolution
        } else {
            let base = combine(sigma_p.as_slice())?;
            let zero_m = Mat::zeros(m.rows(), m.cols());
            let mut directions = Vec::new();
            for z in &null {
                let mut d = zero_m.as_dmatrix().clone();
                for (c, t) in z.iter().zip(&red.terms) {
                    d += t.c.as_dmatrix() * *c;
                }
                let scale: f64 = red.terms.iter().map(|t| t.c.fro()).sum();
                if fro(&d) > 1e-12 * scale {
                    directions.push(Mat::checked(d)?);
                }
            }
            if directions.is_empty() {
                // the null space of I − F does not move X
                let sigma = hs.iter().map(|h| h.apply(&base)).collect::<Result<Vec<_>>>()?;
                Outcome::Unique { x: base, sigma }
            } else {
                Outcome::NonUniqueFamily { base, directions }
            }
        }
    };
    diag.relative_residual = match &outcome {
        Outcome::Unique { x, sigma } => {
            let scale = m.fro() + sigma.iter().zip(&red.terms).map(|(s, t)| s.abs() * t.c.fro()).sum::<f64>();
            Some(red.residual(x)? / scale.max(f64::MIN_POSITIVE))
        }
        _ => None,
    };
    Ok(LinearOutcome { outcome, diagnostics: diag })
}

/// Relative residual of the unique solution, or the worst residual of the
/// family members at `t = 0` and at a fixed nonzero `t`.
fn check_outcome(problem: &QuasiLinearProblem, outcome: &Outcome) -> Result<Option<f64>> {
    match outcome {
        Outcome::Unique { x, .. } => Ok(Some(problem.relative_residual(x)?)),
        Outcome::NonUniqueFamily { base, directions } => {
            let r0 = problem.relative_residual(base)?;
            let mut x = base.as_dmatrix().clone();
            for (k, d) in directions.iter().enumerate() {
                let t = 0.731 - 0.257 * k as f64;
                x += d.as_dmatrix() * t;
            }
            let r1 = problem.relative_residual(&Mat::checked(x)?)?;
            Ok(Some(r0.max(r1)))
        }
        Outcome::NoSolution => Ok(None),
    }
}

/// `trace(X)` for `AX + XA + trace(X) C = D` from solves with `A` only:
/// `trace(X) = trace(A⁻¹D) / (2 + trace(A⁻¹C))`.
pub fn trace_shortcut(a: &Mat, c: &Mat, d: &Mat) -> Result<f64> {
    let n = check_shortcut(a, d)?;
    if c.shape() != (n, n) {
        return Err(mismatch("C must have the shape of A"));
    }
    let lu = a_lu(a)?;
    let tc = lu.solve(c.as_dmatrix()).ok_or(Error::SingularMatrix("A"))?.trace();
    finish_shortcut(&lu, tc, d)
}

/// As [`trace_shortcut`] with `C = C₁C₂ᵀ` given by its `n × k` factors;
/// `trace(A⁻¹C) = trace(C₂ᵀ A⁻¹ C₁)` costs `k` solves with `A`.
pub fn trace_shortcut_low_rank(a: &Mat, c1: &Mat, c2: &Mat, d: &Mat) -> Result<f64> {
    let n = check_shortcut(a, d)?;
    if c1.rows() != n || c2.rows() != n || c1.cols() != c2.cols() {
        return Err(mismatch("C₁ and C₂ must both be n×k"));
    }
    let lu = a_lu(a)?;
    let z = lu.solve(c1.as_dmatrix()).ok_or(Error::SingularMatrix("A"))?;
    let tc = crate::matcore::mat::trace_product(&c2.transpose(), &z);
    finish_shortcut(&lu, tc, d)
}

fn check_shortcut(a: &Mat, d: &Mat) -> Result<usize> {
    let n = a.rows();
    if !a.is_square() || d.shape() != (n, n) {
        return Err(mismatch("trace shortcut needs square A and D of equal size"));
    }
    Ok(n)
}

fn a_lu(a: &Mat) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let lu = a.as_dmatrix().clone().lu();
    let u = lu.u();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..u.nrows() {
        lo = lo.min(u[(i, i)].abs());
        hi = hi.max(u[(i, i)].abs());
    }
    if u.nrows() > 0 && (hi == 0.0 || lo <= 1e3 * crate::EPS * hi) {
        return Err(Error::SingularMatrix("A"));
    }
    Ok(lu)
}

fn finish_shortcut(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, tc: f64, d: &Mat) -> Result<f64> {
    let denom = 2.0 + tc;
    if denom.abs() <= 1e-12 * (1.0 + tc.abs()) {
        return Err(Error::ZeroDenominator);
    }
    let td = lu.solve(d.as_dmatrix()).ok_or(Error::SingularMatrix("A"))?.trace();
    Ok(td / denom)
}

/// Residual `R = AX̃ + X̃B + f(X̃)C − D` and the error `E = X̃ − X⋆`, which
/// solves `E = L⁻¹(R) + f(E) N` (same operator, right side `R`).
pub fn error_from_residual(problem: &QuasiLinearProblem, x_approx: &Mat) -> Result<(Mat, Mat)> {
    if problem.terms.len() != 1 || !problem.terms[0].f.is_linear() {
        return Err(mismatch("error_from_residual needs a single linear term"));
    }
    let r = problem.residual_matrix(x_approx)?;
    let op = SylvesterOperator::new(&problem.a, &problem.b)?;
    let h = problem.terms[0].f.as_linear().expect("checked above");
    let m = op.solve(&r)?;
    let n = op.solve(&problem.terms[0].c)?.scale(-1.0);
    let red = ReducedProblem::new(m, alloc::vec![Term::new(n, FunctionalSpec::Linear(h.clone()))])?;
    let (e, _) = solve_reduced(&red)?.into_unique()?;
    Ok((r, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::kron::kron_solve;
    use alloc::vec;

    fn m(rows: usize, cols: usize, v: &[f64]) -> Mat {
        Mat::from_row_major(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn identity_instance() {
        let i2 = Mat::identity(2);
        let p = QuasiLinearProblem::single(i2.clone(), i2.clone(), i2.clone(), FunctionalSpec::trace(), i2).unwrap();
        let out = solve_single(&p).unwrap();
        let (x, s) = out.unique().unwrap();
        assert!((s[0] - 0.5).abs() < 1e-15);
        assert!(fro(&(x.as_dmatrix() - DMatrix::identity(2, 2) * 0.25)) < 1e-15);
    }

    #[test]
    fn zero_c_is_sylvester() {
        let a = m(2, 2, &[3.0, 1.0, 0.0, 2.0]);
        let d = m(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let p = QuasiLinearProblem::single(a.clone(), a.clone(), Mat::zeros(2, 2), FunctionalSpec::trace(), d.clone())
            .unwrap();
        let (x, s) = solve_single(&p).unwrap().into_unique().unwrap();
        let y = crate::matcore::solve_sylvester(&a, &a, &d).unwrap();
        assert_eq!(x, y);
        assert!((s[0] - y.trace()).abs() < 1e-15);
    }

    #[test]
    fn singular_taxonomy_scalar() {
        // a = b = 1, c = −2: N = 1, f(N) = 1
        let one = m(1, 1, &[1.0]);
        let c = m(1, 1, &[-2.0]);
        let p = QuasiLinearProblem::single(one.clone(), one.clone(), c.clone(), FunctionalSpec::trace(), m(1, 1, &[2.0]))
            .unwrap();
        assert!(matches!(solve_single(&p).unwrap().outcome, Outcome::NoSolution));
        let p = QuasiLinearProblem::single(one.clone(), one, c, FunctionalSpec::trace(), Mat::zeros(1, 1)).unwrap();
        assert!(matches!(solve_single(&p).unwrap().outcome, Outcome::NonUniqueFamily { .. }));
    }

    #[test]
    fn multi_matches_single_and_kron() {
        let a = m(3, 3, &[4.0, 1.0, 0.0, -1.0, 3.0, 0.5, 0.2, 0.0, 5.0]);
        let b = m(3, 3, &[2.0, 0.0, 1.0, 0.3, 3.0, 0.0, 0.0, -0.4, 2.5]);
        let c1 = m(3, 3, &[1.0, 0.0, 2.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0]);
        let c2 = m(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.5, 0.0, 0.0]);
        let d = m(3, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.5]);
        let h2 = LinearFunctional::RankOne { u: vec![1.0, 0.0, -1.0], v: vec![0.5, 2.0, 0.0] };
        let p1 = QuasiLinearProblem::single(a.clone(), b.clone(), c1.clone(), FunctionalSpec::trace(), d.clone()).unwrap();
        let s = solve_single(&p1).unwrap().into_unique().unwrap();
        let t = solve_multi(&p1).unwrap().into_unique().unwrap();
        assert!(fro(&(s.0.as_dmatrix() - t.0.as_dmatrix())) <= 1e-13 * s.0.fro());
        let p2 = QuasiLinearProblem::new(
            a,
            b,
            vec![Term::new(c1, FunctionalSpec::trace()), Term::new(c2, FunctionalSpec::Linear(h2))],
            d,
        )
        .unwrap();
        let (x, _) = solve_multi(&p2).unwrap().into_unique().unwrap();
        let k = kron_solve(&p2).unwrap();
        assert!(fro(&(x.as_dmatrix() - k.as_dmatrix())) <= 1e-12 * k.fro());
    }

    #[test]
    fn trace_shortcut_examples() {
        let i2 = Mat::identity(2);
        assert!((trace_shortcut(&i2, &i2, &i2).unwrap() - 0.5).abs() < 1e-15);
        let d = m(2, 2, &[3.0, 1.0, 1.0, 5.0]);
        assert!((trace_shortcut(&i2, &Mat::zeros(2, 2), &d).unwrap() - 4.0).abs() < 1e-15);
        let c = i2.scale(-1.0);
        assert_eq!(trace_shortcut(&i2, &c, &d), Err(Error::ZeroDenominator));
    }

    #[test]
    fn error_residual_with_zero_c() {
        let a = m(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        let d = m(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let p = QuasiLinearProblem::single(a.clone(), a.clone(), Mat::zeros(2, 2), FunctionalSpec::trace(), d).unwrap();
        let x0 = Mat::zeros(2, 2);
        let (r, e) = error_from_residual(&p, &x0).unwrap();
        let want = crate::matcore::solve_sylvester(&a, &a, &r).unwrap();
        assert!(fro(&(e.as_dmatrix() - want.as_dmatrix())) < 1e-15);
    }
}
