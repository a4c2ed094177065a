//! Riemannian optimization of isometric tensor networks.
//!
//! The crate is organized in layers:
//!
//! - [`linalg`]: dense complex matrix kernels (QR, SVD, hermitian eigen,
//!   matrix exponential of skew-hermitian matrices, polar decomposition,
//!   a Sylvester solver for hermitian positive pencils) plus restarted
//!   Krylov solvers (Arnoldi for dominant eigenpairs, GMRES).
//! - [`tensor`]: a small dense complex tensor with permutation and pairwise
//!   contraction, used by the network modules.
//! - [`manifolds`]: complex Stiefel and Grassmann geometry — points,
//!   factored tangent vectors, metric, projection, retraction, transport,
//!   the density-matrix preconditioner, and product manifolds.
//! - [`optimize`]: Riemannian gradient descent, Hager–Zhang nonlinear CG,
//!   and L-BFGS, with a Wolfe line search and pluggable preconditioner.
//! - [`mera`]: scale-invariant ternary MERA energies, environments,
//!   gradients, the physical-metric preconditioner, and the Evenbly–Vidal
//!   baseline.
//! - [`mps`]: uniform left-canonical infinite MPS against an MPO
//!   Hamiltonian, with the transfer fixed-point preconditioner.
//! - [`checkpoint`]: versioned JSON containers for MERA/MPS states.
//! - [`cli`]: the benchmark harness behind the `riemanntn` binary.
//!
//! All scalars are complex double precision. Matrices are stored
//! column-major (first index fastest), matching both `nalgebra` and the
//! tensor engine's index fusion convention.

pub mod checkpoint;
pub mod cli;
pub mod linalg;
pub mod manifolds;
pub mod mera;
pub mod mps;
pub mod optimize;
pub mod tensor;

pub use linalg::{CMatrix, CVector, LinAlgError, LinearOperator};

/// Complex double-precision scalar used across the crate.
pub type C64 = num_complex::Complex64;

/// Ground-state energy density of the critical transverse-field Ising
/// chain, `H = -sum X X - g sum Z` at `g = 1`: the free-fermion integral
/// evaluates to `-4/pi`.
pub const ISING_CRITICAL_ENERGY: f64 = -4.0 / std::f64::consts::PI;
