//! The damped Kačanov iteration
//! `A_eps[u^n](u^{n+1} − u^n) = −δ F_eps(u^n)`.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::fem::{h1_seminorm, Discretization, FemFunction, SourceTerm};
use crate::kernels::RelaxationPair;
use crate::linalg::{cg_solve, CgReport};

/// How the damping factor `δ` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Damping {
    /// A fixed `δ ∈ (0, 1]`.
    Fixed(f64),
    /// `δ = safety · delta_max` with `safety ∈ (0, 1)`, which guarantees
    /// monotone energy decay.
    TheorySafe { safety: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KacanovConfig {
    pub damping: Damping,
    /// Stop once `‖∇(u^{n+1} − u^n)‖ < outer_tol`.
    pub outer_tol: f64,
    pub max_outer: usize,
    pub inner_rel_tol: f64,
    /// `None` means `20 · dimension`.
    pub inner_max_iter: Option<usize>,
}

impl Default for KacanovConfig {
    fn default() -> Self {
        Self {
            damping: Damping::Fixed(0.9),
            outer_tol: 1e-10,
            max_outer: 1000,
            inner_rel_tol: 1e-12,
            inner_max_iter: None,
        }
    }
}

impl KacanovConfig {
    pub fn validate(&self) -> Result<()> {
        match self.damping {
            Damping::Fixed(d) if !(d > 0.0 && d <= 1.0) => {
                return Err(Error::Config(format!("fixed damping must lie in (0, 1], got {d}")))
            }
            Damping::TheorySafe { safety } if !(safety > 0.0 && safety < 1.0) => {
                return Err(Error::Config(format!("damping safety factor must lie in (0, 1), got {safety}")))
            }
            _ => {}
        }
        if !(self.outer_tol >= 0.0) {
            return Err(Error::Config(format!("outer tolerance must be nonnegative, got {}", self.outer_tol)));
        }
        if !(self.inner_rel_tol > 0.0) {
            return Err(Error::Config(format!("inner tolerance must be positive, got {}", self.inner_rel_tol)));
        }
        Ok(())
    }

    /// The damping factor used for the cut-off pair `eps`.
    pub fn delta(&self, eps: &RelaxationPair) -> f64 {
        match self.damping {
            Damping::Fixed(d) => d,
            Damping::TheorySafe { safety } => safety * eps.delta_max,
        }
    }
}

/// `μ_-/δ − √3 ξ'_+/2`: the guaranteed energy decrease per squared step
/// norm. Positive iff `delta < delta_max`.
pub fn gamma_lower_bound(eps: &RelaxationPair, delta: f64) -> f64 {
    eps.mu_minus / delta - 3f64.sqrt() * eps.xi_plus / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    /// `‖∇(u^{n+1} − u^n)‖`.
    pub step_norm: f64,
    pub delta: f64,
    pub cg: CgReport,
}

/// One row of an [`IterationTrace`]; energies are those of `u^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub n: usize,
    pub step_norm: f64,
    pub energy_relaxed: f64,
    pub energy_unrelaxed: f64,
    pub cg_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub delta: f64,
    /// Energies of the returned iterate.
    pub final_energy_relaxed: f64,
    pub final_energy_unrelaxed: f64,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// Relaxed energies `E_eps(u^0), …, E_eps(u^N)` including the final iterate.
    pub fn relaxed_energies(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.records.iter().map(|r| r.energy_relaxed).collect();
        e.push(self.final_energy_relaxed);
        e
    }

    /// `n,step_norm,energy_relaxed,energy_unrelaxed,cg_iters` rows after a
    /// header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "n,step_norm,energy_relaxed,energy_unrelaxed,cg_iters")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{}",
                r.n, r.step_norm, r.energy_relaxed, r.energy_unrelaxed, r.cg_iterations
            )?;
        }
        Ok(())
    }
}

/// A relaxed problem ready to iterate: discretization, cut-offs, load
/// vector and iteration settings.
#[derive(Debug, Clone)]
pub struct KacanovSolver {
    disc: Discretization,
    eps: RelaxationPair,
    load: Vec<f64>,
    config: KacanovConfig,
}

impl KacanovSolver {
    pub fn new(disc: Discretization, eps: RelaxationPair, f: &SourceTerm, config: KacanovConfig) -> Result<Self> {
        let load = disc.assemble_load(f)?;
        Self::with_load(disc, eps, load, config)
    }

    pub fn with_load(disc: Discretization, eps: RelaxationPair, load: Vec<f64>, config: KacanovConfig) -> Result<Self> {
        config.validate()?;
        if load.len() != disc.mesh().num_interior() {
            return Err(Error::DimensionMismatch {
                expected: disc.mesh().num_interior(),
                found: load.len(),
            });
        }
        Ok(Self {
            disc,
            eps,
            load,
            config,
        })
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn relaxation(&self) -> &RelaxationPair {
        &self.eps
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn config(&self) -> &KacanovConfig {
        &self.config
    }

    pub fn delta(&self) -> f64 {
        self.config.delta(&self.eps)
    }

    pub fn residual(&self, u: &FemFunction) -> Result<Vec<f64>> {
        self.disc.residual(&self.eps, u, &self.load)
    }

    pub fn energy_relaxed(&self, u: &FemFunction) -> Result<f64> {
        self.disc.energy_relaxed_with_load(&self.eps, u, &self.load)
    }

    pub fn energy_unrelaxed(&self, u: &FemFunction) -> Result<f64> {
        self.disc.energy_unrelaxed_with_load(u, &self.load)
    }

    /// Increment `d` solving `A_eps[u] d = −δ F_eps(u)`.
    pub fn increment(&self, u: &FemFunction, delta: f64) -> Result<(Vec<f64>, CgReport)> {
        let (mut rhs, a) = self.disc.residual_and_matrix(&self.eps, u, &self.load)?;
        for r in &mut rhs {
            *r *= -delta;
        }
        let max_iter = self.config.inner_max_iter.unwrap_or(20 * a.dimension().max(1));
        let (d, report) = cg_solve(&a, &rhs, self.config.inner_rel_tol, max_iter)?;
        if !report.converged {
            return Err(Error::InnerSolver(report));
        }
        Ok((d, report))
    }

    pub fn step(&self, u: &FemFunction) -> Result<(FemFunction, StepDiagnostics)> {
        let delta = self.delta();
        let (d, cg) = self.increment(u, delta)?;
        let increment = FemFunction::from_interior(u.mesh().clone(), &d)?;
        let mut next = u.clone();
        next.add_interior(&d)?;
        Ok((
            next,
            StepDiagnostics {
                step_norm: h1_seminorm(&increment),
                delta,
                cg,
            },
        ))
    }

    pub fn solve(&self, u0: FemFunction) -> Result<(FemFunction, IterationTrace)> {
        self.solve_observed(u0, |_, _| {})
    }

    /// Iterates until the step norm drops below `outer_tol` or `max_outer`
    /// steps are taken. `observe(n, u^n)` sees every iterate, the initial
    /// guess included.
    pub fn solve_observed(
        &self,
        u0: FemFunction,
        mut observe: impl FnMut(usize, &FemFunction),
    ) -> Result<(FemFunction, IterationTrace)> {
        if !std::sync::Arc::ptr_eq(u0.mesh(), self.disc.mesh()) {
            return Err(Error::MeshMismatch);
        }
        let mut u = u0;
        let mut records = Vec::new();
        let mut converged = false;
        observe(0, &u);
        for n in 0..self.config.max_outer {
            let energy_relaxed = self.energy_relaxed(&u)?;
            let energy_unrelaxed = self.energy_unrelaxed(&u)?;
            let (next, diag) = self.step(&u)?;
            records.push(IterationRecord {
                n,
                step_norm: diag.step_norm,
                energy_relaxed,
                energy_unrelaxed,
                cg_iterations: diag.cg.iterations,
            });
            u = next;
            observe(n + 1, &u);
            if diag.step_norm < self.config.outer_tol {
                converged = true;
                break;
            }
        }
        let trace = IterationTrace {
            records,
            converged,
            delta: self.delta(),
            final_energy_relaxed: self.energy_relaxed(&u)?,
            final_energy_unrelaxed: self.energy_unrelaxed(&u)?,
        };
        Ok((u, trace))
    }
}

/// One damped Kačanov step from `state`.
pub fn kacanov_step(
    state: &FemFunction,
    disc: &Discretization,
    eps: &RelaxationPair,
    load: &[f64],
    config: &KacanovConfig,
) -> Result<(FemFunction, StepDiagnostics)> {
    KacanovSolver::with_load(disc.clone(), *eps, load.to_vec(), *config)?.step(state)
}

/// Runs the damped Kačanov iteration from `u0`.
pub fn solve_relaxed(
    u0: FemFunction,
    disc: &Discretization,
    eps: &RelaxationPair,
    f: &SourceTerm,
    config: &KacanovConfig,
) -> Result<(FemFunction, IterationTrace)> {
    KacanovSolver::new(disc.clone(), *eps, f, *config)?.solve(u0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{derive_constants, ExponentField};
    use crate::mesh::TriMesh;
    use crate::quadrature::QuadratureRule;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn setup(p: ExponentField, n: usize) -> Discretization {
        let mesh = Arc::new(TriMesh::structured_rectangle(0.0, 0.0, 1.0, 1.0, n).unwrap());
        Discretization::new(mesh, p, QuadratureRule::mid_edge()).unwrap()
    }

    #[test]
    fn gamma_examples() {
        let c = derive_constants(2.0, 2.0, 0.5, 2.0).unwrap();
        assert_relative_eq!(gamma_lower_bound(&c, c.delta_max), 0.0, epsilon = 1e-15);
        assert_relative_eq!(gamma_lower_bound(&c, 1.0), 1.0 - 3f64.sqrt() / 2.0, max_relative = 1e-14);
        let c = derive_constants(1.5, 3.0, 0.5, 2.0).unwrap();
        assert_relative_eq!(gamma_lower_bound(&c, c.delta_max), 0.0, epsilon = 1e-12);
        assert_relative_eq!(gamma_lower_bound(&c, 0.1), 5.0 - 2.0 * 3f64.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn config_validation() {
        let mut cfg = KacanovConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.damping = Damping::Fixed(1.5);
        assert!(cfg.validate().is_err());
        cfg.damping = Damping::Fixed(0.0);
        assert!(cfg.validate().is_err());
        cfg.damping = Damping::TheorySafe { safety: 1.0 };
        assert!(cfg.validate().is_err());
        cfg.damping = Damping::TheorySafe { safety: 0.5 };
        assert!(cfg.validate().is_ok());
        let eps = derive_constants(2.0, 2.0, 0.5, 2.0).unwrap();
        assert_relative_eq!(cfg.delta(&eps), 0.5 * eps.delta_max);
    }

    #[test]
    fn linear_problem_converges_in_one_step() {
        let disc = setup(ExponentField::constant(2.0).unwrap(), 8);
        let eps = RelaxationPair::new(disc.exponent(), 1e-3, 1e3).unwrap();
        let f = SourceTerm::new(|x| 1.0 + x[0] * x[1]);
        let cfg = KacanovConfig {
            damping: Damping::Fixed(1.0),
            ..KacanovConfig::default()
        };
        let u0 = FemFunction::interpolate(disc.mesh().clone(), |x| (5.0 * x[0]).cos());
        let solver = KacanovSolver::new(disc.clone(), eps, &f, cfg).unwrap();
        let (u1, _) = solver.step(&u0).unwrap();
        let r = solver.residual(&u1).unwrap();
        let scale = solver.load().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(r.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1e-10 * scale);

        let (_, trace) = solver.solve(FemFunction::zeros(disc.mesh().clone())).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.iterations(), 2); // the exact step, then a zero step
        assert!(trace.records[1].step_norm < 1e-10);
    }

    #[test]
    fn halving_delta_halves_the_increment() {
        let p = ExponentField::new(|x| 1.5 + x[0], 1.5, 2.5).unwrap();
        let disc = setup(p, 6);
        let eps = RelaxationPair::new(disc.exponent(), 0.1, 10.0).unwrap();
        let solver = KacanovSolver::new(disc.clone(), eps, &SourceTerm::constant(2.0), KacanovConfig::default()).unwrap();
        let u = FemFunction::interpolate(disc.mesh().clone(), |x| x[0] * x[1]);
        let (d1, _) = solver.increment(&u, 0.8).unwrap();
        let (d2, _) = solver.increment(&u, 0.4).unwrap();
        for (a, b) in d1.iter().zip(&d2) {
            assert!((a - 2.0 * b).abs() <= 1e-9 * a.abs().max(1e-12));
        }
    }

    #[test]
    fn stationary_start_gives_zero_step() {
        let p = ExponentField::new(|x| 1.6 + 0.8 * x[1], 1.6, 2.4).unwrap();
        let disc = setup(p, 6);
        let eps = RelaxationPair::new(disc.exponent(), 0.01, 100.0).unwrap();
        let solver = KacanovSolver::new(disc.clone(), eps, &SourceTerm::constant(1.0), KacanovConfig::default()).unwrap();
        let (u, trace) = solver.solve(FemFunction::zeros(disc.mesh().clone())).unwrap();
        assert!(trace.converged);
        let (_, diag) = solver.step(&u).unwrap();
        assert!(diag.step_norm <= 1e-9);
    }

    #[test]
    fn max_outer_is_a_soft_failure() {
        let p = ExponentField::new(|x| 1.5 + x[0], 1.5, 2.5).unwrap();
        let disc = setup(p, 4);
        let eps = RelaxationPair::new(disc.exponent(), 0.1, 10.0).unwrap();
        let cfg = KacanovConfig {
            max_outer: 2,
            ..KacanovConfig::default()
        };
        let (_, trace) = solve_relaxed(FemFunction::zeros(disc.mesh().clone()), &disc, &eps, &SourceTerm::constant(1.0), &cfg).unwrap();
        assert!(!trace.converged);
        assert_eq!(trace.iterations(), 2);
    }

    #[test]
    fn trace_csv_layout() {
        let disc = setup(ExponentField::constant(2.0).unwrap(), 3);
        let eps = RelaxationPair::new(disc.exponent(), 0.5, 2.0).unwrap();
        let (_, trace) = solve_relaxed(
            FemFunction::zeros(disc.mesh().clone()),
            &disc,
            &eps,
            &SourceTerm::constant(1.0),
            &KacanovConfig::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "n,step_norm,energy_relaxed,energy_unrelaxed,cg_iters");
        assert_eq!(lines.len(), trace.iterations() + 1);
        assert_eq!(lines[1].split(',').count(), 5);
    }
}
