//! Solvers for the quasi-linear matrix equation
//!
//! ```text
//! A X + X B + f(X) C = D
//! ```
//!
//! where `f` maps the unknown `n × m` matrix to a scalar. After applying the
//! inverse Sylvester operator `L(X) = AX + XB` the problem takes the reduced
//! form `X = M + f(X) N` with `M = L⁻¹(D)` and `N = −L⁻¹(C)`; every solver in
//! this crate works from that form.
//!
//! * [`linearf`]: closed-form solutions for linear `f(X) = trace(HX)`,
//!   including several linear terms.
//! * [`polyf`]: `trace(X^p)`, `‖X‖²_F` and `trace(X⁻¹)` reduced to a scalar
//!   polynomial in `r = f(X)`.
//! * [`fixpoint`]: fixed-point iteration for `f(X) = trace(ψ(X))`.
//! * [`scalarnl`]: `f(X) = g(h(X))` with linear `h`, reduced to a scalar
//!   nonlinear equation.
//! * [`mech`]: Newton-step equations of interior-point methods for
//!   masonry-like material projections.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod fixpoint;
pub mod linearf;
pub mod manufacture;
pub mod matcore;
pub mod mech;
pub mod polyf;
pub mod problem;
pub mod scalarnl;

pub use error::{Error, Result};
pub use matcore::{ComplexMat, Mat};
pub use problem::{QuasiLinearProblem, ReducedProblem, Term};

/// Unit roundoff for `f64`.
pub(crate) const EPS: f64 = f64::EPSILON;
