//! Manufactured model problems with exact solution
//! `u*(x, y) = sin(πx) sin(πy)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::SourceTerm;
use crate::kernels::ExponentField;
use crate::Point;

/// Gradient moduli at or below this are treated as critical points.
pub const GRAD_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemId {
    Meq1,
    Meq2,
}

impl std::str::FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "meq1" => Ok(ProblemId::Meq1),
            "meq2" => Ok(ProblemId::Meq2),
            other => Err(Error::Config(format!("unknown problem '{other}' (expected meq1 or meq2)"))),
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemId::Meq1 => "meq1",
            ProblemId::Meq2 => "meq2",
        })
    }
}

/// A smooth exact solution with closed-form first and second derivatives.
pub trait ExactSolution: Send + Sync {
    fn value(&self, x: Point) -> f64;
    fn gradient(&self, x: Point) -> Point;
    /// `[u_xx, u_xy, u_yy]`.
    fn hessian(&self, x: Point) -> [f64; 3];
}

/// `sin(πx) sin(πy)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SineProduct;

impl ExactSolution for SineProduct {
    fn value(&self, x: Point) -> f64 {
        (PI * x[0]).sin() * (PI * x[1]).sin()
    }

    fn gradient(&self, x: Point) -> Point {
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        [PI * cx * sy, PI * sx * cy]
    }

    fn hessian(&self, x: Point) -> [f64; 3] {
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        let pi2 = PI * PI;
        [-pi2 * sx * sy, pi2 * cx * cy, -pi2 * sx * sy]
    }
}

/// `f = −div(|∇u|^{p−2} ∇u)` expanded by the chain rule:
/// with `g = |∇u|` and `μ = g^{p−2}`,
/// `∇μ = μ (ln g ∇p + (p − 2) ∇g / g)` and `∇g = H ∇u / g`.
pub fn manufactured_source(p: &ExponentField, u: &dyn ExactSolution, x: Point) -> Result<f64> {
    let grad_p = p
        .gradient(x)
        .ok_or_else(|| Error::InvalidExponent("manufactured source needs the gradient of p".into()))?;
    let pv = p.eval(x);
    let du = u.gradient(x);
    let g = du[0].hypot(du[1]);
    if !(g > GRAD_FLOOR) {
        return Err(Error::CriticalPoint { point: x, grad_norm: g });
    }
    let [hxx, hxy, hyy] = u.hessian(x);
    let laplacian = hxx + hyy;
    let grad_g = [(hxx * du[0] + hxy * du[1]) / g, (hxy * du[0] + hyy * du[1]) / g];
    let mu = g.powf(pv - 2.0);
    let ln_g = g.ln();
    let grad_mu = [
        mu * (ln_g * grad_p[0] + (pv - 2.0) * grad_g[0] / g),
        mu * (ln_g * grad_p[1] + (pv - 2.0) * grad_g[1] / g),
    ];
    Ok(-(grad_mu[0] * du[0] + grad_mu[1] * du[1] + mu * laplacian))
}

/// Domain, exponent, exact solution and matching source of a model problem.
#[derive(Clone)]
pub struct ModelProblem {
    pub id: ProblemId,
    /// `[xmin, ymin, xmax, ymax]`.
    pub domain: [f64; 4],
    pub exponent: ExponentField,
    pub exact: Arc<dyn ExactSolution>,
}

impl fmt::Debug for ModelProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelProblem")
            .field("id", &self.id)
            .field("domain", &self.domain)
            .field("exponent", &self.exponent)
            .finish()
    }
}

impl ModelProblem {
    pub fn by_id(id: ProblemId) -> Self {
        match id {
            ProblemId::Meq1 => meq1(),
            ProblemId::Meq2 => meq2(),
        }
    }

    pub fn exact_solution(&self, x: Point) -> f64 {
        self.exact.value(x)
    }

    pub fn exact_gradient(&self, x: Point) -> Point {
        self.exact.gradient(x)
    }

    pub fn source_at(&self, x: Point) -> Result<f64> {
        manufactured_source(&self.exponent, self.exact.as_ref(), x)
    }

    /// The source as a [`SourceTerm`]. Evaluating it at a critical point of
    /// the exact solution yields NaN, which load assembly rejects.
    pub fn source(&self) -> SourceTerm {
        let p = self.exponent.clone();
        let u = Arc::clone(&self.exact);
        SourceTerm::new(move |x| manufactured_source(&p, u.as_ref(), x).unwrap_or(f64::NAN))
    }

    /// The same problem with `p ≡ 2` (the linear Poisson equation).
    pub fn with_constant_exponent(&self, p: f64) -> Result<Self> {
        Ok(Self {
            exponent: ExponentField::constant(p)?,
            ..self.clone()
        })
    }
}

/// `Ω = (−1, 1)²`, `p(x, y) = 2.3 + 0.5x + 0.5y`.
pub fn meq1() -> ModelProblem {
    let exponent = ExponentField::new(|x| 2.3 + 0.5 * x[0] + 0.5 * x[1], 1.3, 3.3)
        .expect("valid exponent bounds")
        .with_gradient(|_| [0.5, 0.5]);
    ModelProblem {
        id: ProblemId::Meq1,
        domain: [-1.0, -1.0, 1.0, 1.0],
        exponent,
        exact: Arc::new(SineProduct),
    }
}

/// `Ω = (0, 1)²`, `p(x, y) = 1.2 + 2(x² + y²)`.
pub fn meq2() -> ModelProblem {
    let exponent = ExponentField::new(|x| 1.2 + 2.0 * (x[0] * x[0] + x[1] * x[1]), 1.2, 5.2)
        .expect("valid exponent bounds")
        .with_gradient(|x| [4.0 * x[0], 4.0 * x[1]]);
    ModelProblem {
        id: ProblemId::Meq2,
        domain: [0.0, 0.0, 1.0, 1.0],
        exponent,
        exact: Arc::new(SineProduct),
    }
}
