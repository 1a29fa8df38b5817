//! Newton-step equations from an interior-point method for projecting onto
//! the negative semidefinite cone in the elastic energy norm.
//!
//! The perturbed optimality conditions are
//!
//! ```text
//! S − C(Y + Ȳ) = 0,   Y S − μ I = 0,   Y ≻ 0, S ≻ 0.
//! ```
//!
//! Symmetrizing the second equation (AHO or NT) and linearizing gives a
//! quasi-linear equation for the step `X` in `Y`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{mismatch, Error, Result};
use crate::linearf::{solve_multi, solve_single};
use crate::matcore::functional::{FunctionalSpec, LinearFunctional};
use crate::matcore::mat::{fro, sym, trace_product};
use crate::matcore::sqrtm::{SpdEigen, SYMMETRY_TOL};
use crate::matcore::Mat;
use crate::problem::{QuasiLinearProblem, ReducedProblem, Term};

/// A symmetric linear map on symmetric matrices.
pub trait ElasticMap {
    fn dim(&self) -> Option<usize>;
    fn apply(&self, x: &Mat) -> Result<Mat>;
}

/// Isotropic elasticity `C(X) = E/(1+ν) (X + ν/(1−2ν) trace(X) I)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElasticityIso {
    e: f64,
    nu: f64,
}

impl ElasticityIso {
    pub fn new(e: f64, nu: f64) -> Result<Self> {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::InvalidElasticity(format!("E = {e} must be positive")));
        }
        if !(nu > -1.0 && nu < 0.5) {
            return Err(Error::InvalidElasticity(format!("ν = {nu} must lie in (−1, 1/2)")));
        }
        Ok(ElasticityIso { e, nu })
    }

    pub fn young(&self) -> f64 {
        self.e
    }

    pub fn poisson(&self) -> f64 {
        self.nu
    }

    /// `E / (1 + ν)`.
    pub fn shear_coefficient(&self) -> f64 {
        self.e / (1.0 + self.nu)
    }

    /// `ν E / ((1 + ν)(1 − 2ν))`.
    pub fn trace_coefficient(&self) -> f64 {
        self.nu * self.e / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))
    }
}

impl ElasticMap for ElasticityIso {
    fn dim(&self) -> Option<usize> {
        None
    }

    fn apply(&self, x: &Mat) -> Result<Mat> {
        check_symmetric(x)?;
        let n = x.rows();
        let t = x.trace();
        let out = x.as_dmatrix() * self.shear_coefficient()
            + DMatrix::<f64>::identity(n, n) * (self.trace_coefficient() * t);
        Mat::checked(out)
    }
}

/// `C(X)` for isotropic elasticity.
pub fn isotropic_apply(el: &ElasticityIso, x: &Mat) -> Result<Mat> {
    el.apply(x)
}

fn check_symmetric(x: &Mat) -> Result<()> {
    if !x.is_square() {
        return Err(mismatch("elasticity maps act on square matrices"));
    }
    if fro(&(x.as_dmatrix() - x.as_dmatrix().transpose())) > SYMMETRY_TOL * x.fro() {
        return Err(Error::NotSymmetric);
    }
    Ok(())
}

fn check_spd(x: &Mat) -> Result<()> {
    SpdEigen::new(x).map(|_| ())
}

/// Transversely isotropic (or general) elasticity `C(X) = Σ trace(HᵢX) Kᵢ`.
#[derive(Clone, Debug)]
pub struct ElasticityTI {
    terms: Vec<(Mat, Mat)>,
}

impl ElasticityTI {
    pub fn new(terms: Vec<(Mat, Mat)>) -> Result<Self> {
        let n = terms.first().map(|t| t.0.rows()).ok_or_else(|| mismatch("no terms"))?;
        for (h, k) in &terms {
            if h.shape() != (n, n) || k.shape() != (n, n) {
                return Err(mismatch(format!("every H and K must be {n}x{n}")));
            }
            check_symmetric(h)?;
            check_symmetric(k)?;
        }
        Ok(ElasticityTI { terms })
    }

    /// The isotropic map in the orthonormal basis of symmetric matrices:
    /// `Hᵢ = Bᵢ`, `Kᵢ = C(Bᵢ)`, `ℓ = n(n+1)/2`.
    pub fn from_isotropic(el: &ElasticityIso, n: usize) -> Result<Self> {
        let mut terms = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                let mut b = DMatrix::<f64>::zeros(n, n);
                if i == j {
                    b[(i, i)] = 1.0;
                } else {
                    let v = core::f64::consts::FRAC_1_SQRT_2;
                    b[(i, j)] = v;
                    b[(j, i)] = v;
                }
                let b = Mat::wrap(b);
                let k = el.apply(&b)?;
                terms.push((b, k));
            }
        }
        Ok(ElasticityTI { terms })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[(Mat, Mat)] {
        &self.terms
    }
}

impl ElasticMap for ElasticityTI {
    fn dim(&self) -> Option<usize> {
        Some(self.terms[0].0.rows())
    }

    fn apply(&self, x: &Mat) -> Result<Mat> {
        let n = self.terms[0].0.rows();
        if x.shape() != (n, n) {
            return Err(mismatch(format!("expected a {n}x{n} argument")));
        }
        let mut out = DMatrix::<f64>::zeros(n, n);
        for (h, k) in &self.terms {
            out += k.as_dmatrix() * trace_product(h, x);
        }
        Mat::checked(out)
    }
}

/// `C(Y + Ȳ) − S`, the residual of the first optimality equation.
fn first_residual(el: &dyn ElasticMap, s: &Mat, y: &Mat, ybar: &Mat) -> Result<Mat> {
    let c = el.apply(&Mat::wrap(y.as_dmatrix() + ybar.as_dmatrix()))?;
    Ok(Mat::wrap(c.as_dmatrix() - s.as_dmatrix()))
}

/// AHO right side `D = 2μI − (YS + SY) − (YR + RY)`, `R = C(Y + Ȳ) − S`.
pub fn aho_rhs(el: &dyn ElasticMap, s: &Mat, y: &Mat, ybar: &Mat, mu: f64) -> Result<Mat> {
    let n = s.rows();
    if y.shape() != (n, n) || ybar.shape() != (n, n) {
        return Err(mismatch("S, Y and Ȳ must have equal size"));
    }
    let r = first_residual(el, s, y, ybar)?;
    let (sd, yd, rd) = (s.as_dmatrix(), y.as_dmatrix(), r.as_dmatrix());
    let d = DMatrix::<f64>::identity(n, n) * (2.0 * mu) - (yd * sd + sd * yd) - (yd * rd + rd * yd);
    Mat::checked(d)
}

/// NT right side `D = μY⁻¹ − C(Y + Ȳ)`.
pub fn nt_rhs(el: &dyn ElasticMap, y: &Mat, ybar: &Mat, mu: f64) -> Result<Mat> {
    let yinv = spd_inverse(y)?;
    let c = el.apply(&Mat::wrap(y.as_dmatrix() + ybar.as_dmatrix()))?;
    Mat::checked(yinv * mu - c.as_dmatrix())
}

fn cholesky(w: &Mat) -> Result<Cholesky<f64, Dyn>> {
    check_spd(w)?;
    Cholesky::new(sym(w)).ok_or(Error::NotSpd { min_eig: 0.0 })
}

fn spd_inverse(w: &Mat) -> Result<DMatrix<f64>> {
    Ok(sym(&cholesky(w)?.inverse()))
}

/// AHO step equation for isotropic `C`:
/// `A = B = S + E/(1+ν) Y`, `C = 2νE/((1+ν)(1−2ν)) Y`, `f = trace`.
///
/// The factor 2 comes from `C(X)Y + YC(X)` contributing
/// `ν/(1−2ν) trace(X)` once from each side.
pub fn build_aho_iso(s: &Mat, y: &Mat, ybar: &Mat, el: &ElasticityIso, mu: f64) -> Result<QuasiLinearProblem> {
    check_spd(s)?;
    check_spd(y)?;
    check_symmetric(ybar)?;
    let a = Mat::checked(s.as_dmatrix() + y.as_dmatrix() * el.shear_coefficient())?;
    let c = y.scale(2.0 * el.trace_coefficient());
    let d = aho_rhs(el, s, y, ybar, mu)?;
    QuasiLinearProblem::single(a.clone(), a, c, FunctionalSpec::trace(), d)
}

/// NT step equation `WXW + C(X) = D` multiplied by `W⁻¹` from the left:
/// `A = E/(1+ν) W⁻¹`, `B = W`, `C = νE/((1+ν)(1−2ν)) W⁻¹`, right side `W⁻¹D`.
pub fn build_nt_iso(w: &Mat, d: &Mat, el: &ElasticityIso) -> Result<QuasiLinearProblem> {
    let chol = cholesky(w)?;
    check_symmetric(d)?;
    if d.shape() != w.shape() {
        return Err(mismatch("W and D must have equal size"));
    }
    let winv = sym(&chol.inverse());
    let a = Mat::checked(&winv * el.shear_coefficient())?;
    let c = Mat::checked(&winv * el.trace_coefficient())?;
    let rhs = Mat::checked(chol.solve(d.as_dmatrix()))?;
    QuasiLinearProblem::single(a, w.clone(), c, FunctionalSpec::trace(), rhs)
}

/// Frame of a transversely isotropic step equation.
#[derive(Clone, Copy, Debug)]
pub enum TiFrame<'a> {
    Aho { s: &'a Mat, y: &'a Mat },
    Nt { w: &'a Mat },
}

/// A built step equation: full form (AHO) or reduced form (NT).
#[derive(Clone, Debug)]
pub enum StepProblem {
    Full(QuasiLinearProblem),
    Reduced(ReducedProblem),
}

/// AHO: `SX + XS + Σ trace(HᵢX)(KᵢY + YKᵢ) = D`.
/// NT: `X = W⁻¹DW⁻¹ + Σ trace(HᵢX) Nᵢ`, `Nᵢ = −W⁻¹KᵢW⁻¹`.
pub fn build_ti_problem(ti: &ElasticityTI, frame: TiFrame<'_>, d: &Mat) -> Result<StepProblem> {
    let n = ti.dim().unwrap_or(0);
    if d.shape() != (n, n) {
        return Err(mismatch(format!("D must be {n}x{n}")));
    }
    match frame {
        TiFrame::Aho { s, y } => {
            check_spd(s)?;
            check_spd(y)?;
            if s.shape() != (n, n) || y.shape() != (n, n) {
                return Err(mismatch("S and Y must match the elasticity terms"));
            }
            let terms = ti
                .terms
                .iter()
                .map(|(h, k)| {
                    let c = k.as_dmatrix() * y.as_dmatrix() + y.as_dmatrix() * k.as_dmatrix();
                    Term::new(Mat::wrap(c), FunctionalSpec::Linear(LinearFunctional::Dense(h.clone())))
                })
                .collect();
            Ok(StepProblem::Full(QuasiLinearProblem::new(s.clone(), s.clone(), terms, d.clone())?))
        }
        TiFrame::Nt { w } => {
            if w.shape() != (n, n) {
                return Err(mismatch("W must match the elasticity terms"));
            }
            let winv = spd_inverse(w)?;
            let m = Mat::checked(&winv * d.as_dmatrix() * &winv)?;
            let terms = ti
                .terms
                .iter()
                .map(|(h, k)| {
                    let nmat = -(&winv * k.as_dmatrix() * &winv);
                    Term::new(Mat::wrap(nmat), FunctionalSpec::Linear(LinearFunctional::Dense(h.clone())))
                })
                .collect();
            Ok(StepProblem::Reduced(ReducedProblem::new(m, terms)?))
        }
    }
}

/// `‖SX + XS + C(X)Y + YC(X) − D‖_F` over the sum of the term norms.
pub fn aho_residual(el: &dyn ElasticMap, s: &Mat, y: &Mat, d: &Mat, x: &Mat) -> Result<f64> {
    let cx = el.apply(&x.symmetrized())?;
    let (sd, yd, xd, cd) = (s.as_dmatrix(), y.as_dmatrix(), x.as_dmatrix(), cx.as_dmatrix());
    let t1 = sd * xd + xd * sd;
    let t2 = cd * yd + yd * cd;
    let r = &t1 + &t2 - d.as_dmatrix();
    Ok(fro(&r) / (fro(&t1) + fro(&t2) + d.fro()).max(f64::MIN_POSITIVE))
}

/// `‖WXW + C(X) − D‖_F` over the sum of the term norms.
pub fn nt_residual(el: &dyn ElasticMap, w: &Mat, d: &Mat, x: &Mat) -> Result<f64> {
    let cx = el.apply(&x.symmetrized())?;
    let t1 = w.as_dmatrix() * x.as_dmatrix() * w.as_dmatrix();
    let r = &t1 + cx.as_dmatrix() - d.as_dmatrix();
    Ok(fro(&r) / (fro(&t1) + cx.fro() + d.fro()).max(f64::MIN_POSITIVE))
}

/// NT scaling `W = Y^{−1/2} (Y^{1/2} S Y^{1/2})^{1/2} Y^{−1/2}`, the
/// geometric mean of `Y⁻¹` and `S`; satisfies `WYW = S`.
pub fn nt_scaling(y: &Mat, s: &Mat) -> Result<Mat> {
    let ey = SpdEigen::new(y)?;
    check_spd(s)?;
    let yh = ey.map(|l| l.sqrt());
    let yih = ey.map(|l| 1.0 / l.sqrt());
    let inner = sym(&(&yh * s.as_dmatrix() * &yh));
    let g = SpdEigen::new(&inner)?.map(|l| l.sqrt());
    Mat::checked(sym(&(&yih * g * &yih)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Aho,
    Nt,
}

#[derive(Clone, Debug)]
pub struct DemoStep {
    /// Iterates after the step.
    pub y: Mat,
    pub s: Mat,
    /// Barrier parameter used for the step.
    pub mu: f64,
    /// Relative residual of the step equation in its unreduced form.
    pub step_residual: f64,
    pub tau: f64,
}

pub const MAX_DEMO_STEPS: usize = 50;
const FRACTION_TO_BOUNDARY: f64 = 0.95;
const MAX_HALVINGS: usize = 30;

/// Largest `α` with `Z + αΔ ≻ 0` (infinite if `Δ ⪰ 0`).
fn max_step(z: &Mat, dz: &DMatrix<f64>) -> Result<f64> {
    let ez = SpdEigen::new(z)?;
    let zih = ez.map(|l| 1.0 / l.sqrt());
    let t = sym(&(&zih * dz * &zih));
    let lmin = SymmetricEigen::new(t).eigenvalues.min();
    Ok(if lmin >= 0.0 { f64::INFINITY } else { -1.0 / lmin })
}

fn is_pd(z: &DMatrix<f64>) -> bool {
    Cholesky::new(sym(z)).is_some() && SpdEigen::new(z).is_ok()
}

/// Runs `steps` Newton steps of the projection problem from `Y = S = I`.
///
/// Each step solves the AHO or NT equation for `X = ΔY`, sets
/// `ΔS = C(X) + C(Y + Ȳ) − S` from the linearized first equation, takes
/// `τ = min(1, 0.95 α_max)` halved until `Y + τX` and `S + τΔS` are positive
/// definite, and multiplies `μ` by `mu_factor`.
pub fn projection_demo(
    ybar: &Mat,
    el: &ElasticityIso,
    scheme: Scheme,
    steps: usize,
    mu0: f64,
    mu_factor: f64,
) -> Result<Vec<DemoStep>> {
    check_symmetric(ybar)?;
    if steps > MAX_DEMO_STEPS {
        return Err(Error::Unsupported(format!("at most {MAX_DEMO_STEPS} steps")));
    }
    if !(mu0 > 0.0) || !(mu_factor > 0.0) {
        return Err(Error::Unsupported("μ₀ and the μ factor must be positive".into()));
    }
    let n = ybar.rows();
    let mut y = Mat::identity(n);
    let mut s = Mat::identity(n);
    let mut mu = mu0;
    let mut out = Vec::with_capacity(steps);
    for step in 0..steps {
        let (x, step_residual) = match scheme {
            Scheme::Aho => {
                let p = build_aho_iso(&s, &y, ybar, el, mu)?;
                let (x, _) = solve_single(&p)?.into_unique()?;
                let x = x.symmetrized();
                let r = aho_residual(el, &s, &y, &p.d, &x)?;
                (x, r)
            }
            Scheme::Nt => {
                let w = nt_scaling(&y, &s)?;
                let d = nt_rhs(el, &y, ybar, mu)?.symmetrized();
                let p = build_nt_iso(&w, &d, el)?;
                let (x, _) = solve_single(&p)?.into_unique()?;
                let x = x.symmetrized();
                let r = nt_residual(el, &w, &d, &x)?;
                (x, r)
            }
        };
        let cx = el.apply(&x)?;
        let ds = cx.as_dmatrix() + first_residual(el, &s, &y, ybar)?.as_dmatrix();
        let ds = sym(&ds);
        let amax = max_step(&y, x.as_dmatrix())?.min(max_step(&s, &ds)?);
        let mut tau = (FRACTION_TO_BOUNDARY * amax).min(1.0);
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let yn = y.as_dmatrix() + x.as_dmatrix() * tau;
            let sn = s.as_dmatrix() + &ds * tau;
            if is_pd(&yn) && is_pd(&sn) {
                accepted = Some((yn, sn));
                break;
            }
            tau *= 0.5;
        }
        let (yn, sn) = accepted.ok_or(Error::StepFailure { step })?;
        y = Mat::checked(yn)?;
        s = Mat::checked(sn)?;
        out.push(DemoStep { y: y.clone(), s: s.clone(), mu, step_residual, tau });
        mu *= mu_factor;
    }
    Ok(out)
}

/// Solves a built step problem (unique solutions only).
pub fn solve_step(problem: &StepProblem) -> Result<Mat> {
    match problem {
        StepProblem::Full(p) => Ok(solve_multi(p)?.into_unique()?.0),
        StepProblem::Reduced(r) => Ok(crate::linearf::solve_reduced(r)?.into_unique()?.0),
    }
}
