//! Dense kernels: Sylvester solver, matrix functions, eigendecompositions,
//! trace functionals and the vectorized oracle.

pub mod eig;
pub mod expm;
pub mod functional;
pub mod kron;
pub mod mat;
pub mod poly;
pub mod schur;
pub mod sqrtm;
pub mod sylvester;

pub use eig::{eig_general, EigResult};
pub use expm::mat_exp;
pub use functional::{trace_functional, FunctionalSpec, LinearFunctional};
pub use kron::{kron_solve, smw_rank_one};
pub use mat::{ComplexMat, Mat};
pub use poly::poly_roots;
pub use sqrtm::{is_spd, mat_inv_sqrt, mat_sqrt};
pub use sylvester::{solve_sylvester, SylvesterOperator};
