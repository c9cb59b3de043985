//! Helpers shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::sync::Arc;

use pxkacanov::fem::FemFunction;
use pxkacanov::kernels::{mu_eps_at, xi_eps_at, RelaxationPair};
use pxkacanov::mesh::TriMesh;
use rand::Rng;

pub fn unit_square(n: usize) -> Arc<TriMesh> {
    Arc::new(TriMesh::structured_rectangle(0.0, 0.0, 1.0, 1.0, n).unwrap())
}

pub fn square(domain: [f64; 4], n: usize) -> Arc<TriMesh> {
    Arc::new(TriMesh::structured_rectangle(domain[0], domain[1], domain[2], domain[3], n).unwrap())
}

/// Log-uniform sample in `[lo, hi]`.
pub fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..=hi.ln())).exp()
}

/// Interior values uniform in `[-a, a]` where the amplitude `a` itself is
/// log-uniform in `[amp_lo, amp_hi]`, so that gradients visit every branch
/// of the cut-off.
pub fn random_fem<R: Rng>(mesh: &Arc<TriMesh>, rng: &mut R, amp_lo: f64, amp_hi: f64) -> FemFunction {
    let a = log_uniform(rng, amp_lo, amp_hi);
    let values: Vec<f64> = (0..mesh.num_interior()).map(|_| rng.gen_range(-a..=a)).collect();
    FemFunction::from_interior(Arc::clone(mesh), &values).unwrap()
}

/// Random exponent bounds and cut-off pair, covering the three regimes
/// `p_+ < 2`, `p_- > 2` and `p_- ≤ 2 ≤ p_+`.
pub fn random_setting<R: Rng>(rng: &mut R) -> (f64, f64, RelaxationPair) {
    let (pm, pp) = match rng.gen_range(0..3) {
        0 => {
            let a = rng.gen_range(1.05..1.95);
            (a, rng.gen_range(a..1.99))
        }
        1 => {
            let a = rng.gen_range(2.01..5.0);
            (a, rng.gen_range(a..6.0))
        }
        _ => (rng.gen_range(1.05..2.0), rng.gen_range(2.0..6.0)),
    };
    let em = log_uniform(rng, 1e-3, 0.9);
    let ep = log_uniform(rng, 1.1, 1e3);
    let eps = pxkacanov::kernels::derive_constants(pm, pp, em, ep).unwrap();
    (pm, pp, eps)
}

/// `mu_minus ≤ mu_eps(p, t) ≤ mu_plus`.
pub fn check_bound_sandwich(p: f64, eps: &RelaxationPair, t: f64) -> Result<(), String> {
    let mu = mu_eps_at(p, eps, t);
    let slack = 1e-12 * mu;
    if mu < eps.mu_minus - slack || mu > eps.mu_plus + slack {
        return Err(format!(
            "mu_eps({p}, {t}) = {mu} outside [{}, {}]",
            eps.mu_minus, eps.mu_plus
        ));
    }
    Ok(())
}

/// `xi_minus (t − s) ≤ xi_eps(t) − xi_eps(s) ≤ xi_plus (t − s)` for `t ≥ s`.
pub fn check_slope_sandwich(p: f64, eps: &RelaxationPair, s: f64, t: f64) -> Result<(), String> {
    let (s, t) = if s <= t { (s, t) } else { (t, s) };
    let (xs, xt) = (xi_eps_at(p, eps, s), xi_eps_at(p, eps, t));
    let diff = xt - xs;
    let slack = 1e-12 * (xs.abs() + xt.abs());
    let (lo, hi) = (eps.xi_minus * (t - s), eps.xi_plus * (t - s));
    if diff < lo - slack || diff > hi + slack {
        return Err(format!("xi slope on [{s}, {t}] with p = {p}: {diff} outside [{lo}, {hi}]"));
    }
    Ok(())
}

fn flux(p: f64, eps: &RelaxationPair, k: [f64; 2]) -> [f64; 2] {
    let mu = mu_eps_at(p, eps, k[0] * k[0] + k[1] * k[1]);
    [mu * k[0], mu * k[1]]
}

/// Both vector inequalities for the flux `mu_eps(|κ|²) κ`:
/// Lipschitz with `√3 xi_plus` and strong monotonicity with `xi_minus`.
pub fn check_vector_inequalities(p: f64, eps: &RelaxationPair, kappa: [f64; 2], tau: [f64; 2]) -> Result<(), String> {
    let (fk, ft) = (flux(p, eps, kappa), flux(p, eps, tau));
    let df = [fk[0] - ft[0], fk[1] - ft[1]];
    let dk = [kappa[0] - tau[0], kappa[1] - tau[1]];
    let dk2 = dk[0] * dk[0] + dk[1] * dk[1];
    // Rounding in the flux difference scales with the flux magnitudes.
    let flux_scale = fk[0].hypot(fk[1]) + ft[0].hypot(ft[1]);
    let lhs_lip = df[0] * df[0] + df[1] * df[1];
    let rhs_lip = 3.0 * eps.xi_plus * eps.xi_plus * dk2;
    if lhs_lip > rhs_lip + 1e-12 * flux_scale * lhs_lip.sqrt() {
        return Err(format!("Lipschitz inequality fails for {kappa:?}, {tau:?} (p = {p}): {lhs_lip} > {rhs_lip}"));
    }
    let lhs_mon = df[0] * dk[0] + df[1] * dk[1];
    let rhs_mon = eps.xi_minus * dk2;
    if lhs_mon < rhs_mon - 1e-12 * flux_scale * dk2.sqrt() {
        return Err(format!("monotonicity fails for {kappa:?}, {tau:?} (p = {p}): {lhs_mon} < {rhs_mon}"));
    }
    Ok(())
}

/// Random gradient vector with log-uniform modulus around the cut-offs.
pub fn random_vector<R: Rng>(rng: &mut R, eps: &RelaxationPair) -> [f64; 2] {
    let r = log_uniform(rng, eps.eps_minus * 1e-2, eps.eps_plus * 1e2);
    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
    [r * theta.cos(), r * theta.sin()]
}
