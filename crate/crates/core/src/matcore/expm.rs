//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants of degree 3, 5, 7, 9 or 13.

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use super::mat::{norm1, Mat};
use crate::error::{mismatch, Error, Result};

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// 1-norm thresholds below which the degree-m approximant is accurate to unit roundoff
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

/// `exp(X)`.
pub fn mat_exp(x: &Mat) -> Result<Mat> {
    if !x.is_square() {
        return Err(mismatch("exp needs a square matrix"));
    }
    Mat::checked(expm(x.as_dmatrix())?)
}

pub(crate) fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let norm = norm1(a);
    if !norm.is_finite() {
        return Err(Error::NumericalOverflow);
    }
    let id = DMatrix::<f64>::identity(n, n);

    for &(m, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            return pade_low(a, &id, coeffs);
        }
    }

    let s = if norm > THETA13 { (norm / THETA13).log2().ceil().max(0.0) as i32 } else { 0 };
    let scaled = a * 2f64.powi(-s);
    let mut r = pade13(&scaled, &id)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalOverflow);
    }
    Ok(r)
}

fn pade_low(a: &DMatrix<f64>, id: &DMatrix<f64>, b: &[f64]) -> Result<DMatrix<f64>> {
    let a2 = a * a;
    let mut u = id * b[1];
    let mut v = id * b[0];
    let mut power = id.clone();
    let mut k = 2;
    while k < b.len() {
        power = &power * &a2;
        v += &power * b[k];
        u += &power * b[k + 1];
        k += 2;
    }
    let u = a * u;
    finish(u, v)
}

fn pade13(a: &DMatrix<f64>, id: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let b = &B13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = a * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + id * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + id * b[0];
    finish(u, v)
}

/// `(V − U)⁻¹ (V + U)`.
fn finish(u: DMatrix<f64>, v: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = &v + &u;
    let q = v - u;
    q.lu().solve(&p).ok_or(Error::NumericalOverflow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::mat::fro;
    use alloc::vec;
    use nalgebra::SymmetricEigen;

    #[test]
    fn zero_and_diagonal() {
        let z = mat_exp(&Mat::zeros(3, 3)).unwrap();
        assert_eq!(z.as_dmatrix(), &DMatrix::<f64>::identity(3, 3));
        let d = mat_exp(&Mat::from_diagonal(&[1.0, 2.0]).unwrap()).unwrap();
        assert!((d[(0, 0)] - 1f64.exp()).abs() < 1e-15 * 3.0);
        assert!((d[(1, 1)] / 2f64.exp() - 1.0).abs() < 1e-15 * 4.0);
        assert_eq!(d[(0, 1)], 0.0);
    }

    #[test]
    fn nilpotent_is_exact() {
        let x = Mat::from_row_major(2, 2, vec![0.0, 3.0, 0.0, 0.0]).unwrap();
        let e = mat_exp(&x).unwrap();
        assert!((e[(0, 1)] - 3.0).abs() < 1e-14);
        assert!((e[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_matches_spectral_for_all_degrees() {
        for scale in [1e-3, 0.1, 0.5, 1.5, 4.0, 30.0] {
            let x = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, -0.4, 0.2, -0.5, 0.3, -0.4, 0.3, 0.8]) * scale;
            let e = expm(&x).unwrap();
            let se = SymmetricEigen::new(x.clone());
            let spectral = &se.eigenvectors
                * DMatrix::from_diagonal(&se.eigenvalues.map(|l| l.exp()))
                * se.eigenvectors.transpose();
            assert!(fro(&(&e - &spectral)) <= 1e-12 * fro(&spectral), "scale {scale}");
        }
    }

    #[test]
    fn overflow_is_reported() {
        let x = Mat::from_diagonal(&[800.0]).unwrap();
        assert_eq!(mat_exp(&x), Err(Error::NumericalOverflow));
    }
}
