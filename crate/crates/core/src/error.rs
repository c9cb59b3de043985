use thiserror::Error;

use crate::linalg::CgReport;
use crate::Point;

#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel argument must be a finite nonnegative number, got {0}")]
    NegativeArgument(f64),

    #[error("invalid exponent field: {0}")]
    InvalidExponent(String),

    #[error("invalid cut-off pair: need 0 < eps_minus < 1 < eps_plus, got ({eps_minus}, {eps_plus})")]
    InvalidCutoff { eps_minus: f64, eps_plus: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("element index {index} out of range for a mesh with {count} triangles")]
    ElementOutOfRange { index: usize, count: usize },

    #[error("function is defined on a different mesh")]
    MeshMismatch,

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("source term is not finite at ({}, {})", .0[0], .0[1])]
    NonFiniteSource(Point),

    #[error("manufactured source is singular at ({}, {}): |grad u| = {grad_norm:e}", .point[0], .point[1])]
    CriticalPoint { point: Point, grad_norm: f64 },

    #[error("inner CG solve did not converge: {0:?}")]
    InnerSolver(CgReport),

    #[error("matrix is singular or not positive definite")]
    Singular,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
