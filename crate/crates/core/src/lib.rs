//! P1 finite elements for the relaxed p(x)-Poisson problem
//!
//! `−div(μ_ε(x, |∇u|²) ∇u) = f` on a rectangle with homogeneous Dirichlet
//! data, where `μ_ε` clamps `|∇u|^{p(x)−2}` to the cut-off range
//! `[ε_-, ε_+]`. The discrete problem is solved by the damped Kačanov
//! iteration, which freezes the coefficient at the current iterate and
//! solves a linear symmetric problem per step.
//!
//! Module map:
//!
//! - [`kernels`]: the pointwise coefficient functions and derived constants
//! - [`mesh`]: structured triangulations and red refinement
//! - [`quadrature`], [`fem`]: assembly, energies and norms
//! - [`linalg`]: compressed-row matrices and preconditioned CG
//! - [`solver`]: the Kačanov iteration and its trace
//! - [`problems`]: manufactured model problems
//! - [`experiments`]: drivers for the convergence studies

// Guards are written as `!(x > 0.0)` so that NaN is rejected along with
// nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod experiments;
pub mod fem;
pub mod kernels;
pub mod linalg;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};

/// A point in the plane.
pub type Point = [f64; 2];
