//! Bartels–Stewart solver for `A X + X B = D`.
//!
//! 1. Real Schur forms `A = U S Uᵀ`, `B = V T Vᵀ`.
//! 2. `F = Uᵀ D V`.
//! 3. Solve `S Y + Y T = F` block column by block column; within a column,
//!    block rows bottom-up. Each diagonal block problem has size ≤ 4.
//! 4. `X = U Y Vᵀ`.

use alloc::format;

use nalgebra::{DMatrix, SMatrix, SVector};

use super::mat::{fro, Mat};
use super::schur::{Block, RealSchur};
use crate::error::{mismatch, Error, Result};
use crate::EPS;

/// Precomputed Schur factors of the Sylvester operator `X ↦ AX + XB`.
///
/// Solving several right-hand sides against the same `(A, B)` reuses both
/// decompositions.
#[derive(Clone, Debug)]
pub struct SylvesterOperator {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    sa: RealSchur,
    sb: RealSchur,
    pivot_floor: f64,
}

impl SylvesterOperator {
    pub fn new(a: &Mat, b: &Mat) -> Result<Self> {
        if !a.is_square() || !b.is_square() {
            return Err(mismatch("Sylvester coefficients must be square"));
        }
        let sa = RealSchur::new(a)?;
        let sb = RealSchur::new(b)?;
        let scale = fro(a) + fro(b);
        Ok(SylvesterOperator {
            a: a.as_dmatrix().clone(),
            b: b.as_dmatrix().clone(),
            sa,
            sb,
            pivot_floor: 64.0 * EPS * scale.max(f64::MIN_POSITIVE),
        })
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.b.nrows()
    }

    /// `AX + XB`.
    pub fn apply(&self, x: &Mat) -> Result<Mat> {
        self.check_shape(x)?;
        Ok(Mat::wrap(&self.a * x.as_dmatrix() + x.as_dmatrix() * &self.b))
    }

    /// `L⁻¹(D)`.
    pub fn solve(&self, d: &Mat) -> Result<Mat> {
        self.check_shape(d)?;
        let n = self.rows();
        let m = self.cols();
        if n == 0 || m == 0 {
            return Ok(Mat::zeros(n, m));
        }
        let ua = &self.sa.q;
        let vb = &self.sb.q;
        let s = &self.sa.t;
        let t = &self.sb.t;
        let mut y = ua.transpose() * d.as_dmatrix() * vb;

        for (jb, bj) in self.sb.blocks.iter().enumerate() {
            let (c0, cw) = (bj.start, bj.size);
            // subtract contributions of the already solved columns
            for bk in &self.sb.blocks[..jb] {
                for c in c0..c0 + cw {
                    for kk in bk.start..bk.start + bk.size {
                        let tkc = t[(kk, c)];
                        if tkc != 0.0 {
                            for i in 0..n {
                                y[(i, c)] -= y[(i, kk)] * tkc;
                            }
                        }
                    }
                }
            }
            for (ib, bi) in self.sa.blocks.iter().enumerate().rev() {
                let (r0, rh) = (bi.start, bi.size);
                // subtract S_il Y_lj for row blocks below
                for bl in &self.sa.blocks[ib + 1..] {
                    for r in r0..r0 + rh {
                        for c in c0..c0 + cw {
                            let mut acc = 0.0;
                            for l in bl.start..bl.start + bl.size {
                                acc += s[(r, l)] * y[(l, c)];
                            }
                            y[(r, c)] -= acc;
                        }
                    }
                }
                self.solve_block(s, t, *bi, *bj, &mut y)?;
            }
        }
        Mat::checked(ua * y * vb.transpose())
    }

    /// Solves `S_ii Y + Y T_jj = R` in place for the `(bi, bj)` block of `y`.
    fn solve_block(
        &self,
        s: &DMatrix<f64>,
        t: &DMatrix<f64>,
        bi: Block,
        bj: Block,
        y: &mut DMatrix<f64>,
    ) -> Result<()> {
        let (p, q) = (bi.size, bj.size);
        let k = p * q;
        // vec ordering: column-major over the p×q block
        let mut g = SMatrix::<f64, 4, 4>::zeros();
        let mut rhs = SVector::<f64, 4>::zeros();
        for jj in 0..q {
            for ii in 0..p {
                let row = ii + jj * p;
                rhs[row] = y[(bi.start + ii, bj.start + jj)];
                for ll in 0..p {
                    g[(row, ll + jj * p)] += s[(bi.start + ii, bi.start + ll)];
                }
                for kk in 0..q {
                    g[(row, ii + kk * p)] += t[(bj.start + kk, bj.start + jj)];
                }
            }
        }
        let sol = small_solve(&mut g, &mut rhs, k, self.pivot_floor)?;
        for jj in 0..q {
            for ii in 0..p {
                y[(bi.start + ii, bj.start + jj)] = sol[ii + jj * p];
            }
        }
        Ok(())
    }

    fn check_shape(&self, x: &Mat) -> Result<()> {
        if x.rows() != self.rows() || x.cols() != self.cols() {
            return Err(mismatch(format!(
                "expected a {}x{} matrix, got {}x{}",
                self.rows(),
                self.cols(),
                x.rows(),
                x.cols()
            )));
        }
        Ok(())
    }
}

/// Gaussian elimination with complete pivoting on the leading `k×k` part.
fn small_solve(
    g: &mut SMatrix<f64, 4, 4>,
    rhs: &mut SVector<f64, 4>,
    k: usize,
    floor: f64,
) -> Result<SVector<f64, 4>> {
    let mut perm = [0usize, 1, 2, 3];
    for col in 0..k {
        let (mut pr, mut pc, mut best) = (col, col, -1.0);
        for r in col..k {
            for c in col..k {
                if g[(r, c)].abs() > best {
                    best = g[(r, c)].abs();
                    pr = r;
                    pc = c;
                }
            }
        }
        if best <= floor {
            return Err(Error::SingularOperator);
        }
        g.swap_rows(col, pr);
        rhs.swap_rows(col, pr);
        g.swap_columns(col, pc);
        perm.swap(col, pc);
        for r in (col + 1)..k {
            let factor = g[(r, col)] / g[(col, col)];
            if factor != 0.0 {
                for c in col..k {
                    g[(r, c)] -= factor * g[(col, c)];
                }
                rhs[r] -= factor * rhs[col];
            }
        }
    }
    let mut z = SVector::<f64, 4>::zeros();
    for r in (0..k).rev() {
        let mut acc = rhs[r];
        for c in (r + 1)..k {
            acc -= g[(r, c)] * z[c];
        }
        z[r] = acc / g[(r, r)];
    }
    let mut out = SVector::<f64, 4>::zeros();
    for i in 0..k {
        out[perm[i]] = z[i];
    }
    Ok(out)
}

/// Solves `A X + X B = D`.
pub fn solve_sylvester(a: &Mat, b: &Mat, d: &Mat) -> Result<Mat> {
    SylvesterOperator::new(a, b)?.solve(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn identity_case_halves() {
        let i2 = Mat::identity(2);
        let d = Mat::from_row_major(2, 2, vec![1.0, -2.0, 3.5, 4.0]).unwrap();
        let x = solve_sylvester(&i2, &i2, &d).unwrap();
        assert!(fro(&(x.as_dmatrix() - d.as_dmatrix() * 0.5)) < 1e-15);
    }

    #[test]
    fn scalar_case() {
        let a = Mat::from_row_major(1, 1, vec![3.0]).unwrap();
        let b = Mat::from_row_major(1, 1, vec![2.0]).unwrap();
        let d = Mat::from_row_major(1, 1, vec![10.0]).unwrap();
        assert_eq!(solve_sylvester(&a, &b, &d).unwrap()[(0, 0)], 2.0);
    }

    #[test]
    fn complex_blocks_on_both_sides() {
        let a = Mat::from_row_major(3, 3, vec![1.0, -2.0, 0.0, 2.0, 1.0, 0.5, 0.0, 0.0, 3.0]).unwrap();
        let b = Mat::from_row_major(2, 2, vec![0.5, -1.0, 1.0, 0.5]).unwrap();
        let d = Mat::from_row_major(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let op = SylvesterOperator::new(&a, &b).unwrap();
        let x = op.solve(&d).unwrap();
        let r = op.apply(&x).unwrap();
        assert!(fro(&(r.as_dmatrix() - d.as_dmatrix())) < 1e-13);
    }

    #[test]
    fn common_eigenvalue_is_singular() {
        // A = diag(1, 2), B = diag(-1, 5): λ(A) ∩ λ(-B) = {1}
        let a = Mat::from_diagonal(&[1.0, 2.0]).unwrap();
        let b = Mat::from_diagonal(&[-1.0, 5.0]).unwrap();
        let d = Mat::identity(2);
        assert_eq!(solve_sylvester(&a, &b, &d), Err(Error::SingularOperator));
    }

    #[test]
    fn shape_errors() {
        let a = Mat::identity(2);
        let b = Mat::identity(3);
        assert!(matches!(
            solve_sylvester(&a, &b, &Mat::zeros(3, 2)),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
