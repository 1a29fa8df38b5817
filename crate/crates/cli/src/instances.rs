//! Seeded random instances for the experiment commands and the tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use quasilin_core::fixpoint::{frechet_trace, PsiKind};
use quasilin_core::manufacture::{exp_instance, fixpoint_m, ExpInstance};
use quasilin_core::matcore::{is_spd, mat_sqrt};
use quasilin_core::{Mat, Result};

pub const DEFAULT_SEED: u64 = 1;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rng: &mut impl Rng, rows: usize, cols: usize) -> Mat {
    let v: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Mat::from_column_major(rows, cols, &v).expect("normal samples are finite")
}

/// Entries uniform on `[0, 1)`.
pub fn uniform(rng: &mut impl Rng, rows: usize, cols: usize) -> Mat {
    let v: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>()).collect();
    Mat::from_column_major(rows, cols, &v).expect("uniform samples are finite")
}

pub fn randn_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `(G₀ᵀG₀)^{1/2}`.
pub fn gram_sqrt(g0: &Mat) -> Result<Mat> {
    let gram = g0.transpose().matmul(g0)?.symmetrized();
    mat_sqrt(&gram)
}

/// `(G₀ᵀG₀)^{1/2}` with `G₀` standard normal.
pub fn spd_normal(rng: &mut impl Rng, n: usize) -> Result<Mat> {
    gram_sqrt(&randn(rng, n, n))
}

/// Exp-iteration instance with prescribed contraction factor: `G` and `N`
/// are `(G₀ᵀG₀)^{1/2}` for independent normal `G₀`, shared across all
/// targets for one seed; `X⋆ = √α G` with `α` chosen to hit `sigma`.
pub fn table1_instance(seed: u64, n: usize, sigma: f64) -> Result<ExpInstance> {
    let mut r = rng(seed);
    let g = spd_normal(&mut r, n)?;
    let nm = spd_normal(&mut r, n)?;
    exp_instance(&g, &nm, sigma)
}

/// Data `(M, N, X⋆)` for the diagonal-trajectory experiment.
#[derive(Clone, Debug)]
pub struct TrajectoryInstance {
    pub m: Mat,
    pub n: Mat,
    pub x_star: Mat,
}

/// Contraction factor targeted by the exp trajectory instance.
pub const TRAJECTORY_EXP_SIGMA: f64 = 0.5;

/// `X⋆ = (X₀ᵀX₀)^{1/2}` with `X₀ = 2n·randn`, `M = X⋆ − f(X⋆)N`, and
/// `N = s (N₀ᵀN₀)^{1/2}`:
///
/// * square root: `N₀` uniform on `[0, 1)`, `s = 0.2`, halved until `M` is
///   positive definite so that the iteration stays in the cone;
/// * exp: `N₀` standard normal, `s` chosen so that `trace(N exp(−X⋆)) = 0.5`.
///   With a fixed scale the contraction factor swings over orders of
///   magnitude between seeds.
///
/// `n_scale` fixes `s` instead.
pub fn trajectory_instance(seed: u64, n: usize, psi: PsiKind, n_scale: Option<f64>) -> Result<TrajectoryInstance> {
    let mut r = rng(seed);
    let x0 = randn(&mut r, n, n).scale(2.0 * n as f64);
    let x_star = gram_sqrt(&x0)?;
    let n0 = match psi {
        PsiKind::Sqrt => uniform(&mut r, n, n),
        PsiKind::ExpNeg => randn(&mut r, n, n),
    };
    let base = gram_sqrt(&n0)?;
    let mut s = match (n_scale, psi) {
        (Some(s), _) => s,
        (None, PsiKind::Sqrt) => 0.2,
        (None, PsiKind::ExpNeg) => TRAJECTORY_EXP_SIGMA / frechet_trace(PsiKind::ExpNeg, &x_star, &base)?,
    };
    loop {
        let nm = base.scale(s);
        let m = fixpoint_m(&x_star, &nm, psi)?;
        if psi == PsiKind::ExpNeg || s == 0.0 || is_spd(&m) {
            return Ok(TrajectoryInstance { m, n: nm, x_star });
        }
        s *= 0.5;
    }
}
