//! Roots of real polynomials from companion-matrix eigenvalues.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::schur::RealSchur;
use crate::error::{Error, Result};

/// Evaluates `Σ c_k z^k` (coefficients in ascending order) and its derivative.
pub fn horner(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All complex roots of `Σ c_k z^k`, with multiplicity.
///
/// Coefficients are in ascending order; exact zero leading coefficients are
/// dropped. Eigenvalues of the balanced companion matrix are refined by a
/// few Newton steps; complex roots come out as exact conjugate pairs.
pub fn poly_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let mut deg = coeffs.len();
    while deg > 0 && coeffs[deg - 1] == 0.0 {
        deg -= 1;
    }
    if deg == 0 {
        return Err(Error::DegenerateCase("zero polynomial"));
    }
    let c = &coeffs[..deg];
    let p = deg - 1;
    if p == 0 {
        return Ok(Vec::new());
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalOverflow);
    }
    let lead = c[p];
    let mut comp = DMatrix::<f64>::zeros(p, p);
    for i in 1..p {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..p {
        comp[(i, p - 1)] = -c[i] / lead;
    }
    balance(&mut comp);
    let schur = RealSchur::new(&comp)?;
    let mut roots = Vec::with_capacity(p);
    for ev in schur.eigenvalues() {
        if ev.im == 0.0 {
            roots.push(polish(c, ev));
        } else if ev.im > 0.0 {
            let z = polish(c, ev);
            roots.push(z);
            roots.push(z.conj());
        }
    }
    Ok(roots)
}

fn polish(c: &[f64], z0: Complex64) -> Complex64 {
    let real = z0.im == 0.0;
    let mut z = z0;
    let (mut pz, _) = horner(c, z);
    for _ in 0..8 {
        let (p, dp) = horner(c, z);
        if dp.norm() == 0.0 || p.norm() == 0.0 {
            break;
        }
        let mut step = p / dp;
        if real {
            step.im = 0.0;
        }
        let cand = z - step;
        let (pc, _) = horner(c, cand);
        if !(pc.norm() < pz.norm()) {
            break;
        }
        z = cand;
        pz = pc;
    }
    z
}

/// Diagonal similarity scaling that equalizes row and column norms.
fn balance(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    let radix = 2.0f64;
    let mut done = false;
    let mut sweeps = 0;
    while !done && sweeps < 100 {
        done = true;
        sweeps += 1;
        for i in 0..n {
            let mut r = 0.0;
            let mut col = 0.0;
            for j in 0..n {
                if j != i {
                    col += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if col == 0.0 || r == 0.0 {
                continue;
            }
            let mut g = r / radix;
            let mut f = 1.0;
            let s = col + r;
            while col < g {
                f *= radix;
                col *= radix * radix;
            }
            g = r * radix;
            while col > g {
                f /= radix;
                col /= radix * radix;
            }
            if (col + r) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
}
