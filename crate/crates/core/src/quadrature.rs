//! Triangle quadrature rules in barycentric form.

use crate::error::{Error, Result};
use crate::Point;

/// Weights are relative to the element area and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(points: Vec<[f64; 3]>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() || points.is_empty() {
            return Err(Error::Config("quadrature needs one weight per point".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-14 {
            return Err(Error::Config("quadrature weights must be positive and sum to 1".into()));
        }
        for b in &points {
            if b.iter().any(|&l| l < 0.0) || (b.iter().sum::<f64>() - 1.0).abs() > 1e-14 {
                return Err(Error::Config(format!("invalid barycentric point {b:?}")));
            }
        }
        Ok(Self { points, weights })
    }

    /// Edge-midpoint rule, exact for quadratics.
    pub fn mid_edge() -> Self {
        Self {
            points: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
            weights: vec![1.0 / 3.0; 3],
        }
    }

    /// Seven-point symmetric rule, exact for polynomials of degree 5.
    pub fn seven_point() -> Self {
        let s = 15f64.sqrt();
        let (a1, b1) = ((9.0 - 2.0 * s) / 21.0, (6.0 + s) / 21.0);
        let (a2, b2) = ((9.0 + 2.0 * s) / 21.0, (6.0 - s) / 21.0);
        let (w1, w2) = ((155.0 + s) / 1200.0, (155.0 - s) / 1200.0);
        Self {
            points: vec![
                [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
                [a1, b1, b1],
                [b1, a1, b1],
                [b1, b1, a1],
                [a2, b2, b2],
                [b2, a2, b2],
                [b2, b2, a2],
            ],
            weights: vec![0.225, w1, w1, w1, w2, w2, w2],
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Physical location of every quadrature point on the triangle `corners`.
    pub fn map(&self, corners: [Point; 3]) -> impl Iterator<Item = Point> + '_ {
        self.points.iter().map(move |l| {
            [
                l[0] * corners[0][0] + l[1] * corners[1][0] + l[2] * corners[2][0],
                l[0] * corners[0][1] + l[1] * corners[1][1] + l[2] * corners[2][1],
            ]
        })
    }
}
