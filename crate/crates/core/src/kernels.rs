//! Pointwise coefficient functions of the cut-off relaxation.
//!
//! Calling convention: `mu_eps` and `phi_eps` take the *squared* gradient
//! modulus `t = |∇u|²`, while `xi_eps` and `xi_prime` take the modulus
//! `t = |∇u|` itself.
//!
//! Every kernel comes in two flavours: one taking an [`ExponentField`] and a
//! point (validating its argument), and a `*_at` variant taking the exponent
//! value directly, used by the assembly loops.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::Point;

type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(Point) -> Point + Send + Sync>;

/// Slack allowed when checking `eval` against the declared bounds.
const BOUND_SLACK: f64 = 1e-12;

/// A variable exponent `p(x)` together with its declared infimum and supremum.
#[derive(Clone)]
pub struct ExponentField {
    eval: ScalarFn,
    gradient: Option<VectorFn>,
    p_minus: f64,
    p_plus: f64,
}

impl fmt::Debug for ExponentField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExponentField")
            .field("p_minus", &self.p_minus)
            .field("p_plus", &self.p_plus)
            .field("has_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl ExponentField {
    /// The bounds are taken as given; they are not estimated from `eval`.
    pub fn new<F>(eval: F, p_minus: f64, p_plus: f64) -> Result<Self>
    where
        F: Fn(Point) -> f64 + Send + Sync + 'static,
    {
        if !(p_minus.is_finite() && p_plus.is_finite()) {
            return Err(Error::InvalidExponent(format!(
                "bounds must be finite, got [{p_minus}, {p_plus}]"
            )));
        }
        if p_minus <= 1.0 {
            return Err(Error::InvalidExponent(format!(
                "p_minus must exceed 1, got {p_minus}"
            )));
        }
        if p_minus > p_plus {
            return Err(Error::InvalidExponent(format!(
                "p_minus {p_minus} exceeds p_plus {p_plus}"
            )));
        }
        Ok(Self {
            eval: Arc::new(eval),
            gradient: None,
            p_minus,
            p_plus,
        })
    }

    pub fn constant(p: f64) -> Result<Self> {
        let mut field = Self::new(move |_| p, p, p)?;
        field.gradient = Some(Arc::new(|_| [0.0, 0.0]));
        Ok(field)
    }

    /// Attaches the spatial gradient of `p`, needed for manufactured sources.
    pub fn with_gradient<G>(mut self, gradient: G) -> Self
    where
        G: Fn(Point) -> Point + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    #[inline]
    pub fn eval(&self, x: Point) -> f64 {
        (self.eval)(x)
    }

    /// Evaluates `p(x)` and checks it against the declared bounds.
    pub fn try_eval(&self, x: Point) -> Result<f64> {
        let p = self.eval(x);
        if !p.is_finite()
            || p < self.p_minus - BOUND_SLACK
            || p > self.p_plus + BOUND_SLACK
        {
            return Err(Error::InvalidExponent(format!(
                "p({}, {}) = {p} escapes [{}, {}]",
                x[0], x[1], self.p_minus, self.p_plus
            )));
        }
        Ok(p)
    }

    pub fn gradient(&self, x: Point) -> Option<Point> {
        self.gradient.as_ref().map(|g| g(x))
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn is_constant(&self) -> bool {
        self.p_minus == self.p_plus
    }
}

/// The cut-off pair `(eps_minus, eps_plus)` and the global constants derived
/// from it and from the exponent bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationPair {
    pub eps_minus: f64,
    pub eps_plus: f64,
    /// Lower bound of `mu_eps` over the domain.
    pub mu_minus: f64,
    /// Upper bound of `mu_eps` over the domain.
    pub mu_plus: f64,
    /// Lower bound of `xi_prime` (strong monotonicity constant).
    pub xi_minus: f64,
    /// Upper bound of `xi_prime` (Lipschitz constant up to the factor √3).
    pub xi_plus: f64,
    /// Supremum of damping factors with guaranteed energy decay.
    pub delta_max: f64,
}

impl RelaxationPair {
    pub fn new(p: &ExponentField, eps_minus: f64, eps_plus: f64) -> Result<Self> {
        derive_constants(p.p_minus(), p.p_plus(), eps_minus, eps_plus)
    }

    /// The pair `(base^-k, base^k)` used by continuation sweeps.
    pub fn geometric(p: &ExponentField, base: f64, k: i32) -> Result<Self> {
        Self::new(p, base.powi(-k), base.powi(k))
    }
}

/// Fills in `mu_±`, `xi_±` and `delta_max` for the cut-offs and exponent
/// bounds. The `xi` bounds distinguish whether `[p_minus, p_plus]` lies
/// below 2, above 2, or straddles it.
pub fn derive_constants(
    p_minus: f64,
    p_plus: f64,
    eps_minus: f64,
    eps_plus: f64,
) -> Result<RelaxationPair> {
    let ordered = eps_minus.is_finite()
        && eps_plus.is_finite()
        && 0.0 < eps_minus
        && eps_minus < 1.0
        && 1.0 < eps_plus;
    if !ordered {
        return Err(Error::InvalidCutoff {
            eps_minus,
            eps_plus,
        });
    }
    if !(p_minus > 1.0 && p_minus <= p_plus && p_plus.is_finite()) {
        return Err(Error::InvalidExponent(format!(
            "bounds [{p_minus}, {p_plus}] must satisfy 1 < p_minus <= p_plus < inf"
        )));
    }

    let lower_pair = eps_minus.powf(p_plus - 2.0).min(eps_plus.powf(p_minus - 2.0));
    let upper_pair = eps_minus.powf(p_minus - 2.0).max(eps_plus.powf(p_plus - 2.0));
    let mu_minus = lower_pair;
    let mu_plus = upper_pair;

    let (xi_minus, xi_plus) = if p_plus < 2.0 {
        (
            (p_minus - 1.0) * eps_plus.powf(p_minus - 2.0),
            eps_minus.powf(p_minus - 2.0),
        )
    } else if p_minus > 2.0 {
        (
            eps_minus.powf(p_plus - 2.0),
            (p_plus - 1.0) * eps_plus.powf(p_plus - 2.0),
        )
    } else {
        ((p_minus - 1.0) * lower_pair, (p_plus - 1.0) * upper_pair)
    };

    let delta_max = 2.0 * mu_minus / (3f64.sqrt() * xi_plus);

    Ok(RelaxationPair {
        eps_minus,
        eps_plus,
        mu_minus,
        mu_plus,
        xi_minus,
        xi_plus,
        delta_max,
    })
}

/// `base^exponent` for `base >= 0` via `exp(exponent * ln base)`, with the
/// `base == 0` limit handled explicitly.
#[inline]
fn pow_nonneg(base: f64, exponent: f64) -> f64 {
    if base == 0.0 {
        return if exponent > 0.0 {
            0.0
        } else if exponent == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
    }
    (exponent * base.ln()).exp()
}

fn check_arg(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NegativeArgument(t))
    }
}

/// `mu_eps` for an exponent value `p`; `t` is the squared gradient modulus.
/// Branch points belong to the middle branch.
#[inline]
pub fn mu_eps_at(p: f64, eps: &RelaxationPair, t: f64) -> f64 {
    if t < eps.eps_minus * eps.eps_minus {
        pow_nonneg(eps.eps_minus, p - 2.0)
    } else if t > eps.eps_plus * eps.eps_plus {
        pow_nonneg(eps.eps_plus, p - 2.0)
    } else {
        pow_nonneg(t, 0.5 * (p - 2.0))
    }
}

/// Energy density `phi_eps` for an exponent value `p`; `t` is the squared
/// gradient modulus. Satisfies `2 d/dt phi_eps = mu_eps`.
#[inline]
pub fn phi_eps_at(p: f64, eps: &RelaxationPair, t: f64) -> f64 {
    let clamped = |e: f64| {
        0.5 * pow_nonneg(e, p - 2.0) * t + (1.0 / p - 0.5) * pow_nonneg(e, p)
    };
    if t < eps.eps_minus * eps.eps_minus {
        clamped(eps.eps_minus)
    } else if t > eps.eps_plus * eps.eps_plus {
        clamped(eps.eps_plus)
    } else {
        pow_nonneg(t, 0.5 * p) / p
    }
}

/// `xi_eps(t) = mu_eps(t²)·t`; `t` is the gradient modulus.
#[inline]
pub fn xi_eps_at(p: f64, eps: &RelaxationPair, t: f64) -> f64 {
    mu_eps_at(p, eps, t * t) * t
}

/// Derivative of `xi_eps` in `t`. At `t = eps_±` the middle-branch value
/// `(p-1) t^(p-2)` is returned, so the result jumps there.
#[inline]
pub fn xi_prime_at(p: f64, eps: &RelaxationPair, t: f64) -> f64 {
    if t < eps.eps_minus {
        pow_nonneg(eps.eps_minus, p - 2.0)
    } else if t > eps.eps_plus {
        pow_nonneg(eps.eps_plus, p - 2.0)
    } else {
        (p - 1.0) * pow_nonneg(t, p - 2.0)
    }
}

pub fn mu_eps(p: &ExponentField, eps: &RelaxationPair, x: Point, t: f64) -> Result<f64> {
    check_arg(t)?;
    Ok(mu_eps_at(p.eval(x), eps, t))
}

pub fn phi_eps(p: &ExponentField, eps: &RelaxationPair, x: Point, t: f64) -> Result<f64> {
    check_arg(t)?;
    Ok(phi_eps_at(p.eval(x), eps, t))
}

pub fn xi_eps(p: &ExponentField, eps: &RelaxationPair, x: Point, t: f64) -> Result<f64> {
    check_arg(t)?;
    Ok(xi_eps_at(p.eval(x), eps, t))
}

pub fn xi_prime(p: &ExponentField, eps: &RelaxationPair, x: Point, t: f64) -> Result<f64> {
    check_arg(t)?;
    Ok(xi_prime_at(p.eval(x), eps, t))
}
