//! Nonlinear `f` that reduce to a scalar polynomial in `r = f(X)`.
//!
//! Substituting `X = M + rN` into `r = f(X)` gives a polynomial equation for
//! `trace(X^p)`, `‖X‖²_F`, and `trace(X⁻¹)` when `M` or `N` has rank one.
//! Every root is assembled into `X = M + rN` and checked against `f`; roots
//! that fail are kept in [`SolutionSet::spurious`] with the reason.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{mismatch, Error, Result};
use crate::matcore::functional::matrix_power;
use crate::matcore::mat::{fro, fro_c, trace_product};
use crate::matcore::poly::poly_roots;
use crate::matcore::{ComplexMat, Mat};
use crate::EPS;

/// `|f(X) − r|` must stay below `ACCEPT_REL · (1 + |r|)`.
pub const ACCEPT_REL: f64 = 1e-8;

pub fn tol_accept(r: Complex64) -> f64 {
    ACCEPT_REL * (1.0 + r.norm())
}

#[derive(Clone, Debug, PartialEq)]
pub enum Solution {
    Real(Mat),
    Complex(ComplexMat),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Accepted {
    pub root: Complex64,
    pub x: Solution,
    /// `|f(X) − r|`.
    pub f_residual: f64,
    /// `‖X − M − f(X)N‖_F / (‖M‖_F + ‖N‖_F)`.
    pub eq_residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RejectReason {
    /// `f` is real and nonnegative; a complex root cannot be `f(X)`.
    ComplexRoot,
    /// `f` is nonnegative.
    NegativeRoot,
    /// `X = M + rN` is numerically singular.
    SingularSolution,
    VerificationFailed { f_residual: f64, eq_residual: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rejected {
    pub root: Complex64,
    pub reason: RejectReason,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionSet {
    pub entries: Vec<Accepted>,
    pub spurious: Vec<Rejected>,
    /// Polynomial whose roots were examined, ascending powers of `r`.
    pub coefficients: Vec<f64>,
}

impl SolutionSet {
    pub fn degree(&self) -> usize {
        self.entries.len() + self.spurious.len()
    }

    pub fn real_solutions(&self) -> impl Iterator<Item = (&Complex64, &Mat)> {
        self.entries.iter().filter_map(|e| match &e.x {
            Solution::Real(x) => Some((&e.root, x)),
            Solution::Complex(_) => None,
        })
    }
}

#[derive(Clone, Copy, Debug)]
enum Kind {
    Power(u32),
    Frobenius,
    Inverse,
}

/// Reduced data shared by every candidate.
struct Candidates<'a> {
    kind: Kind,
    m: &'a DMatrix<f64>,
    n: &'a DMatrix<f64>,
    scale: f64,
}

impl Candidates<'_> {
    fn check(&self, roots: &[Complex64], coefficients: Vec<f64>) -> SolutionSet {
        let mut entries = Vec::new();
        let mut spurious = Vec::new();
        for &r in roots {
            match self.check_one(r) {
                Ok(a) => entries.push(a),
                Err(reason) => spurious.push(Rejected { root: r, reason }),
            }
        }
        SolutionSet { entries, spurious, coefficients }
    }

    fn check_one(&self, r: Complex64) -> core::result::Result<Accepted, RejectReason> {
        if r.im == 0.0 {
            if matches!(self.kind, Kind::Frobenius) && r.re < 0.0 {
                return Err(RejectReason::NegativeRoot);
            }
            let x = self.m + self.n * r.re;
            let fx = eval_real(self.kind, &x).ok_or(RejectReason::SingularSolution)?;
            let f_residual = (fx - r.re).abs();
            let eq_residual = fro(&(&x - self.m - self.n * fx)) / self.scale;
            let tol = tol_accept(r);
            if !(f_residual <= tol && eq_residual <= tol) {
                return Err(RejectReason::VerificationFailed { f_residual, eq_residual });
            }
            let x = Mat::new(x).map_err(|_| RejectReason::VerificationFailed { f_residual, eq_residual })?;
            Ok(Accepted { root: r, x: Solution::Real(x), f_residual, eq_residual })
        } else {
            if matches!(self.kind, Kind::Frobenius) {
                return Err(RejectReason::ComplexRoot);
            }
            let mc = self.m.map(|v| Complex64::new(v, 0.0));
            let nc = self.n.map(|v| Complex64::new(v, 0.0));
            let x = &mc + &nc * r;
            let fx = eval_complex(self.kind, &x).ok_or(RejectReason::SingularSolution)?;
            let f_residual = (fx - r).norm();
            let eq_residual = fro_c(&(&x - &mc - &nc * fx)) / self.scale;
            let tol = tol_accept(r);
            if !(f_residual <= tol && eq_residual <= tol) {
                return Err(RejectReason::VerificationFailed { f_residual, eq_residual });
            }
            let x = ComplexMat::from_complex(&x)
                .map_err(|_| RejectReason::VerificationFailed { f_residual, eq_residual })?;
            Ok(Accepted { root: r, x: Solution::Complex(x), f_residual, eq_residual })
        }
    }
}

fn eval_real(kind: Kind, x: &DMatrix<f64>) -> Option<f64> {
    let v = match kind {
        Kind::Power(p) => matrix_power(x, p).trace(),
        Kind::Frobenius => {
            let n = fro(x);
            n * n
        }
        Kind::Inverse => {
            let lu = x.clone().lu();
            if pivots_singular(lu.u().diagonal().iter().map(|v| v.abs())) {
                return None;
            }
            lu.try_inverse()?.trace()
        }
    };
    Some(v)
}

fn eval_complex(kind: Kind, x: &DMatrix<Complex64>) -> Option<Complex64> {
    match kind {
        Kind::Power(p) => Some(matrix_power(x, p).trace()),
        Kind::Frobenius => Some(Complex64::new(fro_c(x).powi(2), 0.0)),
        Kind::Inverse => {
            let lu = x.clone().lu();
            if pivots_singular(lu.u().diagonal().iter().map(|v| v.norm())) {
                return None;
            }
            Some(lu.try_inverse()?.trace())
        }
    }
}

fn pivots_singular(pivots: impl Iterator<Item = f64>) -> bool {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for p in pivots {
        lo = lo.min(p);
        hi = hi.max(p);
    }
    hi == 0.0 || lo <= 1e3 * EPS * hi
}

fn check_pair(m: &Mat, n: &Mat) -> Result<()> {
    if !m.is_square() || m.shape() != n.shape() {
        return Err(mismatch("M and N must be square and of equal size"));
    }
    Ok(())
}

fn scale_of(m: &Mat, n: &Mat) -> f64 {
    (m.fro() + n.fro()).max(f64::MIN_POSITIVE)
}

/// Roots of `a r² + b r + c` without cancellation; `a ≠ 0`.
fn quadratic_roots(a: f64, b: f64, c: f64) -> [Complex64; 2] {
    let disc = b * b - 4.0 * a * c;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let q = -0.5 * (b + if b >= 0.0 { sq } else { -sq });
        if q == 0.0 {
            return [Complex64::new(0.0, 0.0); 2];
        }
        [Complex64::new(q / a, 0.0), Complex64::new(c / q, 0.0)]
    } else {
        let re = -b / (2.0 * a);
        let im = (-disc).sqrt() / (2.0 * a).abs();
        [Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

/// `f(X) = trace(X²)`: `r² f(N) + β r + f(M) = 0` with `β = 2 trace(MN) − 1`.
///
/// When `|trace(N²)| ≤ 1e-12 ‖N‖²_F` the equation is treated as linear.
pub fn solve_trace_power2(m: &Mat, n: &Mat) -> Result<SolutionSet> {
    check_pair(m, n)?;
    let fm = trace_product(m, m);
    let fnn = trace_product(n, n);
    let tmn = trace_product(m, n);
    let beta = 2.0 * tmn - 1.0;
    let nn = n.fro();
    let roots: Vec<Complex64> = if fnn.abs() <= 1e-12 * nn * nn {
        if beta.abs() <= 4.0 * EPS * (1.0 + 2.0 * tmn.abs()) {
            return Err(Error::DegenerateCase("f(N) = 0 and β = 0"));
        }
        alloc::vec![Complex64::new(-fm / beta, 0.0)]
    } else {
        quadratic_roots(fnn, beta, fm).to_vec()
    };
    let coefficients = if roots.len() == 1 { alloc::vec![fm, beta] } else { alloc::vec![fm, beta, fnn] };
    let c = Candidates { kind: Kind::Power(2), m, n, scale: scale_of(m, n) };
    Ok(c.check(&roots, coefficients))
}

fn binomial(p: u32, k: u32) -> f64 {
    let mut b = 1.0;
    for i in 0..k {
        b = b * (p - i) as f64 / (i + 1) as f64;
    }
    b
}

/// Coefficients `c_k = trace(P_k)` of `trace((M + rN)^p) = Σ c_k r^k`, where
/// `P_k` is the sum of all length-`p` words in `{M, N}` with `k` factors `N`.
pub fn trace_power_coefficients(m: &Mat, n: &Mat, p: u32) -> Result<Vec<f64>> {
    check_pair(m, n)?;
    let dim = m.rows();
    let p = p as usize;
    // words[k] = sum of words of the current length with k factors N
    let mut words: Vec<DMatrix<f64>> = alloc::vec![DMatrix::identity(dim, dim)];
    for j in 0..p {
        let mut next = Vec::with_capacity(j + 2);
        for k in 0..=j + 1 {
            let mut s = DMatrix::zeros(dim, dim);
            if k <= j {
                s += &words[k] * m.as_dmatrix();
            }
            if k >= 1 {
                s += &words[k - 1] * n.as_dmatrix();
            }
            next.push(s);
        }
        words = next;
    }
    let c: Vec<f64> = words.iter().map(|w| w.trace()).collect();
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalOverflow);
    }
    Ok(c)
}

/// `f(X) = trace(X^p)` for `2 ≤ p ≤ 12` through the roots of `q(r) − r`.
pub fn solve_trace_power_general(m: &Mat, n: &Mat, p: u32) -> Result<SolutionSet> {
    if !(2..=12).contains(&p) {
        return Err(Error::Unsupported(alloc::format!("power {p} outside 2..=12")));
    }
    let mut a = trace_power_coefficients(m, n, p)?;
    a[1] -= 1.0;
    let (mn, nn) = (m.fro(), n.fro());
    let mut deg = p as usize;
    while deg >= 2 {
        let k = deg as u32;
        let thr = 1e-12 * binomial(p, k) * mn.powi((p - k) as i32) * nn.powi(k as i32);
        if a[deg].abs() <= thr {
            deg -= 1;
        } else {
            break;
        }
    }
    a.truncate(deg + 1);
    if deg == 1 && a[1] == 0.0 {
        return Err(Error::DegenerateCase("q(r) − r is constant"));
    }
    let roots = poly_roots(&a)?;
    let c = Candidates { kind: Kind::Power(p), m, n, scale: scale_of(m, n) };
    Ok(c.check(&roots, a))
}

/// `f(X) = ‖X‖²_F`: `r²‖N‖²_F + (2 trace(MᵀN) − 1) r + ‖M‖²_F = 0`.
///
/// Complex and negative roots are rejected; if nothing survives the result
/// is [`Error::NoRealSolution`].
pub fn solve_frobenius(m: &Mat, n: &Mat) -> Result<SolutionSet> {
    if m.shape() != n.shape() {
        return Err(mismatch("M and N differ in shape"));
    }
    let a = n.fro().powi(2);
    let c0 = m.fro().powi(2);
    let b = 2.0 * m.dot(n.as_dmatrix()) - 1.0;
    let roots: Vec<Complex64> = if a == 0.0 {
        if b == 0.0 {
            return Err(Error::DegenerateCase("‖N‖ = 0 and 2 trace(MᵀN) = 1"));
        }
        alloc::vec![Complex64::new(-c0 / b, 0.0)]
    } else {
        quadratic_roots(a, b, c0).to_vec()
    };
    let coefficients = if a == 0.0 { alloc::vec![c0, b] } else { alloc::vec![c0, b, a] };
    let c = Candidates { kind: Kind::Frobenius, m, n, scale: scale_of(m, n) };
    let set = c.check(&roots, coefficients);
    if set.entries.is_empty() {
        return Err(Error::NoRealSolution);
    }
    Ok(set)
}

fn lu_checked(a: &Mat, what: &'static str) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let lu = a.as_dmatrix().clone().lu();
    if a.rows() > 0 && pivots_singular(lu.u().diagonal().iter().map(|v| v.abs())) {
        return Err(Error::SingularMatrix(what));
    }
    Ok(lu)
}

/// `f(X) = trace(X⁻¹)` with `M = m₁m₂ᵀ`: the cubic
/// `r³ + η₂r² + η₁r + η₀ = 0`, `η₂ = m₂ᵀN⁻¹m₁`, `η₁ = −trace(N⁻¹)`,
/// `η₀ = η₁η₂ + m₂ᵀN⁻²m₁`.
pub fn solve_trace_inverse_rank1m(m1: &[f64], m2: &[f64], n: &Mat) -> Result<SolutionSet> {
    let dim = n.rows();
    if !n.is_square() || m1.len() != dim || m2.len() != dim {
        return Err(mismatch("m₁, m₂ must have length n for an n×n N"));
    }
    let lu = lu_checked(n, "N")?;
    let v1 = DVector::from_column_slice(m1);
    let v2 = DVector::from_column_slice(m2);
    let z1 = lu.solve(&v1).ok_or(Error::SingularMatrix("N"))?;
    let z2 = lu.solve(&z1).ok_or(Error::SingularMatrix("N"))?;
    let n_inv = lu.try_inverse().ok_or(Error::SingularMatrix("N"))?;
    let eta2 = v2.dot(&z1);
    let eta1 = -n_inv.trace();
    let eta0 = eta1 * eta2 + v2.dot(&z2);
    let coefficients = alloc::vec![eta0, eta1, eta2, 1.0];
    let roots = poly_roots(&coefficients)?;
    let m = Mat::outer(m1, m2)?;
    let c = Candidates { kind: Kind::Inverse, m: &m, n, scale: scale_of(&m, n) };
    Ok(c.check(&roots, coefficients))
}

/// `f(X) = trace(X⁻¹)` with `N = n₁n₂ᵀ`: `η₂r² + η₁r + η₀ = 0`,
/// `η₀ = −trace(M⁻¹)`, `η₂ = n₂ᵀM⁻¹n₁`, `η₁ = 1 + η₀η₂ + n₂ᵀM⁻²n₁`.
pub fn solve_trace_inverse_rank1n(m: &Mat, n1: &[f64], n2: &[f64]) -> Result<SolutionSet> {
    let dim = m.rows();
    if !m.is_square() || n1.len() != dim || n2.len() != dim {
        return Err(mismatch("n₁, n₂ must have length n for an n×n M"));
    }
    let lu = lu_checked(m, "M")?;
    let v1 = DVector::from_column_slice(n1);
    let v2 = DVector::from_column_slice(n2);
    let z1 = lu.solve(&v1).ok_or(Error::SingularMatrix("M"))?;
    let z2 = lu.solve(&z1).ok_or(Error::SingularMatrix("M"))?;
    let m_inv = lu.try_inverse().ok_or(Error::SingularMatrix("M"))?;
    let eta0 = -m_inv.trace();
    let eta2 = v2.dot(&z1);
    let eta1 = 1.0 + eta0 * eta2 + v2.dot(&z2);
    let roots: Vec<Complex64> = if eta2.abs() <= 4.0 * EPS * (eta1.abs() + eta0.abs()) {
        if eta1 == 0.0 {
            return Err(Error::DegenerateCase("η₂ = η₁ = 0"));
        }
        alloc::vec![Complex64::new(-eta0 / eta1, 0.0)]
    } else {
        quadratic_roots(eta2, eta1, eta0).to_vec()
    };
    let coefficients = if roots.len() == 1 { alloc::vec![eta0, eta1] } else { alloc::vec![eta0, eta1, eta2] };
    let n = Mat::outer(n1, n2)?;
    let c = Candidates { kind: Kind::Inverse, m, n: &n, scale: scale_of(m, &n) };
    Ok(c.check(&roots, coefficients))
}

/// Rank-one factors `u vᵀ` of `a`, or `None` when the numerical rank exceeds one.
pub fn rank_one_factors(a: &Mat) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = a.rows();
    if a.fro() == 0.0 {
        return Some((alloc::vec![0.0; n], alloc::vec![0.0; a.cols()]));
    }
    let svd = a.as_dmatrix().clone().svd(true, true);
    let (u, vt) = (svd.u.as_ref()?, svd.v_t.as_ref()?);
    let s = &svd.singular_values;
    let (mut k, mut s1) = (0, 0.0);
    for (i, &v) in s.iter().enumerate() {
        if v > s1 {
            k = i;
            s1 = v;
        }
    }
    let rest = s.iter().enumerate().filter(|&(i, _)| i != k).fold(0.0f64, |acc, (_, &v)| acc.max(v));
    if rest > 1e-12 * s1 {
        return None;
    }
    let uu = u.column(k).iter().map(|x| x * s1).collect();
    let vv = vt.row(k).iter().copied().collect();
    Some((uu, vv))
}

/// `f(X) = trace(X⁻¹)`, dispatching on whichever of `N` (tried first) and
/// `M` has numerical rank one.
pub fn solve_trace_inverse(m: &Mat, n: &Mat) -> Result<SolutionSet> {
    if !m.is_square() || m.shape() != n.shape() {
        return Err(mismatch("trace(X⁻¹) needs square M and N of equal size"));
    }
    if let Some((n1, n2)) = rank_one_factors(n) {
        return solve_trace_inverse_rank1n(m, &n1, &n2);
    }
    if let Some((m1, m2)) = rank_one_factors(m) {
        return solve_trace_inverse_rank1m(&m1, &m2, n);
    }
    Err(Error::Unsupported("trace(X⁻¹) needs M or N of rank one".into()))
}
