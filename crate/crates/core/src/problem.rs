//! Problem data for `A X + X B + Σ fᵢ(X) Cᵢ = D` and its reduced form.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{mismatch, Result};
use crate::matcore::functional::FunctionalSpec;
use crate::matcore::sylvester::SylvesterOperator;
use crate::matcore::Mat;

/// One quasi-linear term `f(X) C`.
#[derive(Clone, Debug)]
pub struct Term {
    pub c: Mat,
    pub f: FunctionalSpec,
}

impl Term {
    pub fn new(c: Mat, f: FunctionalSpec) -> Self {
        Term { c, f }
    }
}

#[derive(Clone, Debug)]
pub struct QuasiLinearProblem {
    pub a: Mat,
    pub b: Mat,
    pub terms: Vec<Term>,
    pub d: Mat,
}

impl QuasiLinearProblem {
    pub fn new(a: Mat, b: Mat, terms: Vec<Term>, d: Mat) -> Result<Self> {
        let p = QuasiLinearProblem { a, b, terms, d };
        p.validate()?;
        Ok(p)
    }

    pub fn single(a: Mat, b: Mat, c: Mat, f: FunctionalSpec, d: Mat) -> Result<Self> {
        Self::new(a, b, alloc::vec![Term::new(c, f)], d)
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.b.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.a.rows(), self.b.rows());
        if !self.a.is_square() || !self.b.is_square() {
            return Err(mismatch("A and B must be square"));
        }
        if self.d.rows() != n || self.d.cols() != m {
            return Err(mismatch(format!("D must be {n}x{m}")));
        }
        for (i, t) in self.terms.iter().enumerate() {
            if t.c.rows() != n || t.c.cols() != m {
                return Err(mismatch(format!("C{} must be {n}x{m}", i + 1)));
            }
            if let FunctionalSpec::Linear(h) = &t.f {
                h.check(n, m)?;
            } else if n != m {
                return Err(mismatch("nonlinear functionals need square X (n = m)"));
            }
        }
        Ok(())
    }

    /// `‖AX + XB + Σ fᵢ(X)Cᵢ − D‖_F`.
    pub fn residual(&self, x: &Mat) -> Result<f64> {
        Ok(self.residual_matrix(x)?.fro())
    }

    pub fn residual_matrix(&self, x: &Mat) -> Result<Mat> {
        if x.rows() != self.n() || x.cols() != self.m() {
            return Err(mismatch("X has the wrong shape"));
        }
        let mut r = self.a.as_dmatrix() * x.as_dmatrix() + x.as_dmatrix() * self.b.as_dmatrix()
            - self.d.as_dmatrix();
        for t in &self.terms {
            let fx = t.f.evaluate(x)?;
            r += t.c.as_dmatrix() * fx;
        }
        Ok(Mat::wrap(r))
    }

    /// Residual divided by the norms of the individual terms.
    pub fn relative_residual(&self, x: &Mat) -> Result<f64> {
        let r = self.residual(x)?;
        let mut scale = (self.a.fro() + self.b.fro()) * x.fro() + self.d.fro();
        for t in &self.terms {
            scale += t.f.evaluate(x)?.abs() * t.c.fro();
        }
        Ok(if scale > 0.0 { r / scale } else { r })
    }

    /// Reduced form: `M = L⁻¹(D)`, `Nᵢ = −L⁻¹(Cᵢ)`.
    pub fn reduce(&self) -> Result<ReducedProblem> {
        let op = SylvesterOperator::new(&self.a, &self.b)?;
        let m = op.solve(&self.d)?;
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let n = op.solve(&t.c)?.scale(-1.0);
            terms.push(Term::new(n, t.f.clone()));
        }
        Ok(ReducedProblem { m, terms })
    }
}

/// `X = M + Σ fᵢ(X) Nᵢ`; each term's matrix is `Nᵢ`.
#[derive(Clone, Debug)]
pub struct ReducedProblem {
    pub m: Mat,
    pub terms: Vec<Term>,
}

impl ReducedProblem {
    pub fn new(m: Mat, terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            if t.c.shape() != m.shape() {
                return Err(mismatch("every N must have the shape of M"));
            }
            if let FunctionalSpec::Linear(h) = &t.f {
                h.check(m.rows(), m.cols())?;
            }
        }
        Ok(ReducedProblem { m, terms })
    }

    /// `‖X − M − Σ fᵢ(X)Nᵢ‖_F`.
    pub fn residual(&self, x: &Mat) -> Result<f64> {
        if x.shape() != self.m.shape() {
            return Err(mismatch("X has the wrong shape"));
        }
        let mut r = x.as_dmatrix() - self.m.as_dmatrix();
        for t in &self.terms {
            r -= t.c.as_dmatrix() * t.f.evaluate(x)?;
        }
        Ok(crate::matcore::mat::fro(&r))
    }

    /// Residual divided by `‖X‖_F + ‖M‖_F + Σ |fᵢ(X)| ‖Nᵢ‖_F`.
    pub fn relative_residual(&self, x: &Mat) -> Result<f64> {
        let r = self.residual(x)?;
        let mut scale = x.fro() + self.m.fro();
        for t in &self.terms {
            scale += t.f.evaluate(x)?.abs() * t.c.fro();
        }
        Ok(if scale > 0.0 { r / scale } else { r })
    }
}
