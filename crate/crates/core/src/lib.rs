//! Heat kernels of weighted ∂̄-Laplacians `□_{τp}` on `C`, for subharmonic
//! non-harmonic real polynomials `p`.
//!
//! The crate provides a finite-difference heat solver, a Feynman–Kac–Itô
//! Monte Carlo estimator, the control-geometry size functions `Λ`, `μ`, `ρ`,
//! and a verifier that checks kernel estimates against computed kernels.

pub mod feynman_kac;
pub mod fit;
pub mod geometry;
pub mod grid;
pub mod heat_solver;
pub mod linalg;
pub mod operator;
pub mod polynomial;
pub mod report;
pub mod verifier;

pub use grid::{ComplexField, Grid2D};
pub use polynomial::PolynomialSpec;
