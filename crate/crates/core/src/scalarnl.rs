//! `f(X) = g(h(X))` with linear `h`.
//!
//! Applying `h` to `X = M + f(X) N` gives the scalar equation
//!
//! ```text
//! F(y) = γ₁ + g(y) γ₂ − y = 0,   γ₁ = h(M), γ₂ = h(N),
//! ```
//!
//! and every root `y⋆` yields the matrix solution `X = M + g(y⋆) N`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::matcore::functional::LinearFunctional;
use crate::matcore::mat::fro;
use crate::matcore::Mat;
use crate::EPS;

/// Default absolute tolerance on `|F(y)|`.
pub const TOL_SCALAR: f64 = 1e-12;
/// Upper end of the bracketing search.
pub const BRACKET_CAP: f64 = 1e8;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Scalar function `g` together with its derivative and domain.
#[derive(Clone)]
pub enum ScalarFn {
    /// `e^{−y}` on ℝ.
    ExpNeg,
    /// `ln y` on `(0, ∞)`.
    Log,
    Custom {
        value: RealFn,
        derivative: RealFn,
        /// Closed validity interval `[lo, hi]`; infinite ends allowed.
        lo: f64,
        hi: f64,
    },
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::ExpNeg => f.write_str("ExpNeg"),
            ScalarFn::Log => f.write_str("Log"),
            ScalarFn::Custom { lo, hi, .. } => write!(f, "Custom([{lo}, {hi}])"),
        }
    }
}

impl ScalarFn {
    pub fn custom(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lo: f64,
        hi: f64,
    ) -> Self {
        ScalarFn::Custom { value: Arc::new(value), derivative: Arc::new(derivative), lo, hi }
    }

    pub fn value(&self, y: f64) -> f64 {
        match self {
            ScalarFn::ExpNeg => (-y).exp(),
            ScalarFn::Log => y.ln(),
            ScalarFn::Custom { value, .. } => value(y),
        }
    }

    pub fn derivative(&self, y: f64) -> f64 {
        match self {
            ScalarFn::ExpNeg => -(-y).exp(),
            ScalarFn::Log => 1.0 / y,
            ScalarFn::Custom { derivative, .. } => derivative(y),
        }
    }

    /// `g''`; central differences of `g'` for custom functions.
    pub fn second_derivative(&self, y: f64) -> f64 {
        match self {
            ScalarFn::ExpNeg => (-y).exp(),
            ScalarFn::Log => -1.0 / (y * y),
            ScalarFn::Custom { derivative, .. } => {
                let h = 1e-5 * (1.0 + y.abs());
                let (a, b) = (y - h, y + h);
                if self.contains(a) && self.contains(b) {
                    (derivative(b) - derivative(a)) / (2.0 * h)
                } else {
                    f64::NAN
                }
            }
        }
    }

    /// `(lo, hi)`; `Log` excludes its left end.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            ScalarFn::ExpNeg => (f64::NEG_INFINITY, f64::INFINITY),
            ScalarFn::Log => (0.0, f64::INFINITY),
            ScalarFn::Custom { lo, hi, .. } => (*lo, *hi),
        }
    }

    pub fn contains(&self, y: f64) -> bool {
        if !y.is_finite() {
            return false;
        }
        match self {
            ScalarFn::Log => y > 0.0,
            _ => {
                let (lo, hi) = self.domain();
                lo <= y && y <= hi
            }
        }
    }
}

/// `(γ₁, γ₂) = (h(M), h(N))`.
pub fn reduce(m: &Mat, n: &Mat, h: &LinearFunctional) -> Result<(f64, f64)> {
    if m.shape() != n.shape() {
        return Err(crate::error::mismatch("M and N differ in shape"));
    }
    Ok((h.apply(m)?, h.apply(n)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarMethod {
    Newton,
    FixedPoint,
}

#[derive(Clone, Copy, Debug)]
pub struct ScalarOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl ScalarOptions {
    pub fn newton() -> Self {
        ScalarOptions { tol: TOL_SCALAR, max_iter: 100 }
    }

    pub fn fixed_point() -> Self {
        ScalarOptions { tol: TOL_SCALAR, max_iter: 1000 }
    }
}

#[derive(Clone, Debug)]
pub struct ScalarSolveReport {
    pub y_star: f64,
    /// `y₀, y₁, …`, ending at `y_star`.
    pub iterates: Vec<f64>,
    pub method: ScalarMethod,
    /// `|g'(y⋆) γ₂|`.
    pub ostrowski_value: f64,
    pub converged: bool,
    /// `|F(y⋆)|`.
    pub residual: f64,
    /// Newton only: bracket `[a, b]` around the root found by doubling.
    pub bracket: Option<(f64, f64)>,
    /// Newton only: `F' < 0` and `F'' > 0` held at every sample of the bracket.
    pub hypotheses_hold: Option<bool>,
}

struct Scalar<'a> {
    g: &'a ScalarFn,
    g1: f64,
    g2: f64,
}

impl Scalar<'_> {
    fn f(&self, y: f64) -> f64 {
        self.g1 + self.g.value(y) * self.g2 - y
    }

    fn df(&self, y: f64) -> f64 {
        self.g.derivative(y) * self.g2 - 1.0
    }

    fn d2f(&self, y: f64) -> f64 {
        self.g.second_derivative(y) * self.g2
    }

    /// Tolerance scaled by the magnitude of the terms of `F(y)`.
    fn tol(&self, tol: f64, y: f64) -> f64 {
        let mag = self.g1.abs().max((self.g.value(y) * self.g2).abs()).max(y.abs());
        tol * mag.max(1.0)
    }
}

/// Residual `|γ₁ + g(y)γ₂ − y|`.
pub fn scalar_residual(g: &ScalarFn, gamma1: f64, gamma2: f64, y: f64) -> f64 {
    (gamma1 + g.value(y) * gamma2 - y).abs()
}

/// Expands `[a, a + w]` by doubling `w` until `F` changes sign.
fn find_bracket(s: &Scalar<'_>, a: f64) -> Option<(f64, f64)> {
    let fa = s.f(a);
    if fa == 0.0 {
        return Some((a, a));
    }
    let mut w = 1.0f64.max(a.abs());
    while w <= BRACKET_CAP {
        let b = a + w;
        if s.g.contains(b) {
            let fb = s.f(b);
            if fb.is_finite() && fb.signum() != fa.signum() {
                return Some((a, b));
            }
        }
        let c = a - w;
        if s.g.contains(c) {
            let fc = s.f(c);
            if fc.is_finite() && fc.signum() != fa.signum() {
                return Some((c, a));
            }
        }
        w *= 2.0;
    }
    None
}

fn check_hypotheses(s: &Scalar<'_>, (a, b): (f64, f64)) -> bool {
    const SAMPLES: usize = 65;
    (0..SAMPLES).all(|i| {
        let y = a + (b - a) * i as f64 / (SAMPLES - 1) as f64;
        !s.g.contains(y) || (s.df(y) < 0.0 && !(s.d2f(y) <= 0.0))
    })
}

/// Newton's method on `F(y) = γ₁ + g(y)γ₂ − y` from `y0`.
///
/// Steps that leave the domain of `g` are halved until they land inside.
pub fn newton_solve(
    g: &ScalarFn,
    gamma1: f64,
    gamma2: f64,
    y0: f64,
    opts: ScalarOptions,
) -> Result<ScalarSolveReport> {
    if !g.contains(y0) {
        return Err(Error::DomainExit { y: y0 });
    }
    let s = Scalar { g, g1: gamma1, g2: gamma2 };
    let bracket = find_bracket(&s, y0);
    let hypotheses_hold = bracket.map(|br| check_hypotheses(&s, br));

    let mut y = y0;
    let mut iterates = alloc::vec![y];
    for _ in 0..opts.max_iter {
        let fy = s.f(y);
        if fy.abs() <= s.tol(opts.tol, y) {
            return Ok(report(&s, y, iterates, ScalarMethod::Newton, bracket, hypotheses_hold));
        }
        let dfy = s.df(y);
        if !(dfy.abs() > EPS * (1.0 + (g.derivative(y) * gamma2).abs())) {
            return Err(Error::DerivativeVanishes { y });
        }
        let mut step = fy / dfy;
        let mut next = y - step;
        let mut halvings = 0;
        while !g.contains(next) {
            halvings += 1;
            if halvings > 60 {
                return Err(Error::DomainExit { y: y - fy / dfy });
            }
            step *= 0.5;
            next = y - step;
        }
        y = next;
        iterates.push(y);
    }
    if s.f(y).abs() <= s.tol(opts.tol, y) {
        return Ok(report(&s, y, iterates, ScalarMethod::Newton, bracket, hypotheses_hold));
    }
    Err(Error::NoConvergence { iterations: opts.max_iter })
}

/// Fixed-point iteration `y ← γ₁ + g(y)γ₂` from `y0`.
///
/// Converging despite `|g'(y⋆)γ₂| ≥ 1` is possible; the Ostrowski value is
/// reported as computed.
pub fn fixed_point_solve(
    g: &ScalarFn,
    gamma1: f64,
    gamma2: f64,
    y0: f64,
    opts: ScalarOptions,
) -> Result<ScalarSolveReport> {
    let s = Scalar { g, g1: gamma1, g2: gamma2 };
    let mut y = y0;
    let mut iterates = alloc::vec![y];
    for _ in 0..opts.max_iter {
        if !g.contains(y) {
            return Err(Error::DomainExit { y });
        }
        let next = gamma1 + g.value(y) * gamma2;
        // F(y) = next − y
        let converged = (next - y).abs() <= s.tol(opts.tol, y);
        y = next;
        iterates.push(y);
        if converged && g.contains(y) && s.f(y).abs() <= s.tol(opts.tol, y) {
            return Ok(report(&s, y, iterates, ScalarMethod::FixedPoint, None, None));
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iter })
}

fn report(
    s: &Scalar<'_>,
    y: f64,
    iterates: Vec<f64>,
    method: ScalarMethod,
    bracket: Option<(f64, f64)>,
    hypotheses_hold: Option<bool>,
) -> ScalarSolveReport {
    ScalarSolveReport {
        y_star: y,
        iterates,
        method,
        ostrowski_value: (s.g.derivative(y) * s.g2).abs(),
        converged: true,
        residual: s.f(y).abs(),
        bracket,
        hypotheses_hold,
    }
}

/// `X = M + g(y⋆) N`, checked against `h(X) = y⋆` and the reduced equation.
pub fn assemble(m: &Mat, n: &Mat, g: &ScalarFn, y_star: f64, h: &LinearFunctional) -> Result<Mat> {
    if m.shape() != n.shape() {
        return Err(crate::error::mismatch("M and N differ in shape"));
    }
    if !g.contains(y_star) {
        return Err(Error::DomainExit { y: y_star });
    }
    let gy = g.value(y_star);
    let x = Mat::checked(m.as_dmatrix() + n.as_dmatrix() * gy)?;
    let hx = h.apply(&x)?;
    let (g1, g2) = reduce(m, n, h)?;
    let s = Scalar { g, g1, g2 };
    // h(X) − y⋆ = F(y⋆) up to the rounding of forming X
    let slack = 4.0 * EPS * (g1.abs() + (gy * g2).abs()) * (x.rows() * x.cols()) as f64;
    let tol = s.tol(TOL_SCALAR, y_star) + slack;
    if !((hx - y_star).abs() <= tol) {
        return Err(Error::VerificationFailed(format!(
            "h(X) = {hx:e} but y* = {y_star:e}"
        )));
    }
    if !g.contains(hx) {
        return Err(Error::DomainExit { y: hx });
    }
    let r = x.as_dmatrix() - m.as_dmatrix() - n.as_dmatrix() * g.value(hx);
    let scale = m.fro() + gy.abs() * n.fro();
    let res = fro(&r);
    if res > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::VerificationFailed(format!("reduced residual {res:e}")));
    }
    Ok(x)
}

/// Roots of `F` on `[lo, hi]` located by sign changes on a uniform grid and
/// refined by bisection. Roots where `F` touches zero without a sign change
/// are missed.
pub fn scan_roots(g: &ScalarFn, gamma1: f64, gamma2: f64, lo: f64, hi: f64, samples: usize) -> Vec<f64> {
    let s = Scalar { g, g1: gamma1, g2: gamma2 };
    let samples = samples.max(2);
    let mut roots = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..samples {
        let y = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
        if !g.contains(y) {
            prev = None;
            continue;
        }
        let fy = s.f(y);
        if fy == 0.0 {
            roots.push(y);
            prev = None;
            continue;
        }
        if let Some((py, pf)) = prev {
            if pf.signum() != fy.signum() {
                roots.push(bisect(&s, py, y));
            }
        }
        prev = Some((y, fy));
    }
    roots
}

fn bisect(s: &Scalar<'_>, mut a: f64, mut b: f64) -> f64 {
    let mut fa = s.f(a);
    for _ in 0..200 {
        let c = 0.5 * (a + b);
        if c <= a || c >= b {
            break;
        }
        let fc = s.f(c);
        if fc == 0.0 {
            return c;
        }
        if fc.signum() == fa.signum() {
            a = c;
            fa = fc;
        } else {
            b = c;
        }
    }
    0.5 * (a + b)
}
