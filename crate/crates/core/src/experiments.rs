//! Drivers for the three convergence studies: Kačanov iteration error,
//! relaxation-parameter continuation, and uniform mesh refinement.
//!
//! Configuration is a plain `key = value` file (`#` starts a comment) whose
//! keys can be overridden from the command line. Results are CSV tables
//! with a one-line header and numbers in `{:.16e}` notation.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{h1_seminorm_diff, Discretization, FemFunction};
use crate::kernels::RelaxationPair;
use crate::mesh::TriMesh;
use crate::problems::{ModelProblem, ProblemId};
use crate::quadrature::QuadratureRule;
use crate::solver::{Damping, KacanovConfig, KacanovSolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Iteration,
    Relaxation,
    Refinement,
}

/// Initial guess of the iteration under study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialGuess {
    /// `0` for MEQ.1, the interpolant of `sin(πxy)` for MEQ.2.
    Default,
    Zero,
    SinXy,
    /// Nodal interpolant of the exact solution.
    Interpolant,
}

impl std::str::FromStr for InitialGuess {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(Self::Default),
            "zero" => Ok(Self::Zero),
            "sinxy" => Ok(Self::SinXy),
            "interpolant" => Ok(Self::Interpolant),
            other => Err(Error::Config(format!("unknown initial guess '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemId,
    /// Cells per side of the initial structured mesh.
    pub mesh_n: usize,
    /// Uniform refinements applied to the initial mesh. For the refinement
    /// study this is the chain length minus one.
    pub refines: u32,
    pub eps_minus: f64,
    pub eps_plus: f64,
    /// Continuation sweep `eps_± = eps_base^{∓k}` for `k_min ..= k_max`.
    pub eps_base: f64,
    pub k_min: i32,
    pub k_max: i32,
    pub damping: Damping,
    pub tol: f64,
    pub max_iter: usize,
    pub inner_tol: f64,
    /// Kačanov steps used to build the iteration-study reference.
    pub ref_iters: usize,
    pub initial: InitialGuess,
    /// Start each continuation solve from the previous one.
    pub warm_start: bool,
    /// Replace the problem's exponent by `p ≡ 2`.
    pub linear: bool,
    pub element_cap: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

/// Default fixed damping per model problem. MEQ.2 reaches `p = 5.2`, where
/// `δ = 0.9` falls into a two-cycle.
pub fn default_delta(problem: ProblemId) -> f64 {
    match problem {
        ProblemId::Meq1 => 0.9,
        ProblemId::Meq2 => 0.45,
    }
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment, problem: ProblemId) -> Self {
        let (mesh_n, refines) = match experiment {
            Experiment::Iteration | Experiment::Relaxation => (64, 0),
            Experiment::Refinement => (4, 5),
        };
        Self {
            problem,
            mesh_n,
            refines,
            eps_minus: 1e-6,
            eps_plus: 1e6,
            eps_base: 1.4,
            k_min: 1,
            k_max: 40,
            damping: Damping::Fixed(default_delta(problem)),
            tol: 1e-10,
            max_iter: 2000,
            inner_tol: 1e-12,
            ref_iters: 300,
            initial: InitialGuess::Default,
            warm_start: false,
            linear: false,
            element_cap: 1 << 20,
            seed: 0,
            out: None,
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
        }
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "problem" => {
                let problem: ProblemId = value.parse()?;
                if let Damping::Fixed(d) = self.damping {
                    if d == default_delta(self.problem) {
                        self.damping = Damping::Fixed(default_delta(problem));
                    }
                }
                self.problem = problem;
            }
            "mesh_n" => self.mesh_n = num(&key, value)?,
            "refines" => self.refines = num(&key, value)?,
            "eps_minus" => self.eps_minus = num(&key, value)?,
            "eps_plus" => self.eps_plus = num(&key, value)?,
            "eps_base" => self.eps_base = num(&key, value)?,
            "k_min" => self.k_min = num(&key, value)?,
            "k_max" => self.k_max = num(&key, value)?,
            "delta" => self.damping = Damping::Fixed(num(&key, value)?),
            "safety" => self.damping = Damping::TheorySafe { safety: num(&key, value)? },
            "damping" => {
                self.damping = match value {
                    "fixed" => match self.damping {
                        Damping::Fixed(_) => self.damping,
                        Damping::TheorySafe { .. } => Damping::Fixed(default_delta(self.problem)),
                    },
                    "theory_safe" => match self.damping {
                        Damping::TheorySafe { .. } => self.damping,
                        Damping::Fixed(_) => Damping::TheorySafe { safety: 0.5 },
                    },
                    other => return Err(Error::Config(format!("unknown damping mode '{other}'"))),
                }
            }
            "tol" => self.tol = num(&key, value)?,
            "max_iter" => self.max_iter = num(&key, value)?,
            "inner_tol" => self.inner_tol = num(&key, value)?,
            "ref_iters" => self.ref_iters = num(&key, value)?,
            "initial" => self.initial = value.parse()?,
            "warm_start" => self.warm_start = num(&key, value)?,
            "linear" => self.linear = num(&key, value)?,
            "element_cap" => self.element_cap = num(&key, value)?,
            "seed" => self.seed = num(&key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_text(&text)
    }

    pub fn kacanov(&self) -> KacanovConfig {
        KacanovConfig {
            damping: self.damping,
            outer_tol: self.tol,
            max_outer: self.max_iter,
            inner_rel_tol: self.inner_tol,
            inner_max_iter: None,
        }
    }

    pub fn model(&self) -> Result<ModelProblem> {
        let model = ModelProblem::by_id(self.problem);
        if self.linear {
            model.with_constant_exponent(2.0)
        } else {
            Ok(model)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mesh_n == 0 {
            return Err(Error::Config("mesh_n must be positive".into()));
        }
        let elements = (2 * self.mesh_n * self.mesh_n)
            .saturating_mul(4usize.checked_pow(self.refines).unwrap_or(usize::MAX));
        if elements > self.element_cap {
            return Err(Error::Config(format!(
                "finest mesh has {elements} elements, above the cap of {}",
                self.element_cap
            )));
        }
        if self.k_min < 1 || self.k_min > self.k_max {
            return Err(Error::Config(format!(
                "continuation range {}..={} must satisfy 1 <= k_min <= k_max",
                self.k_min, self.k_max
            )));
        }
        if !(self.eps_base > 1.0) {
            return Err(Error::Config(format!("eps_base must exceed 1, got {}", self.eps_base)));
        }
        self.kacanov().validate()
    }

    fn initial_mesh(&self, model: &ModelProblem) -> Result<TriMesh> {
        let [x0, y0, x1, y1] = model.domain;
        TriMesh::structured_rectangle(x0, y0, x1, y1, self.mesh_n)
    }

    /// The initial mesh after `refines` uniform refinements.
    pub fn mesh(&self, model: &ModelProblem) -> Result<Arc<TriMesh>> {
        let mut mesh = self.initial_mesh(model)?;
        for _ in 0..self.refines {
            mesh = mesh.refine_uniform()?;
        }
        Ok(Arc::new(mesh))
    }

    fn initial_guess(&self, model: &ModelProblem, mesh: &Arc<TriMesh>) -> FemFunction {
        let kind = match (self.initial, self.problem) {
            (InitialGuess::Default, ProblemId::Meq1) => InitialGuess::Zero,
            (InitialGuess::Default, ProblemId::Meq2) => InitialGuess::SinXy,
            (other, _) => other,
        };
        match kind {
            InitialGuess::SinXy => FemFunction::interpolate(Arc::clone(mesh), |x| (PI * x[0] * x[1]).sin()),
            InitialGuess::Interpolant => FemFunction::interpolate(Arc::clone(mesh), |x| model.exact_solution(x)),
            _ => FemFunction::zeros(Arc::clone(mesh)),
        }
    }

    fn solver(&self, model: &ModelProblem, mesh: &Arc<TriMesh>, eps: RelaxationPair, kacanov: KacanovConfig) -> Result<KacanovSolver> {
        let disc = Discretization::new(Arc::clone(mesh), model.exponent.clone(), QuadratureRule::mid_edge())?;
        KacanovSolver::new(disc, eps, &model.source(), kacanov)
    }
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRow {
    pub n: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationStudy {
    pub rows: Vec<IterationRow>,
    pub converged: bool,
}

impl IterationStudy {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,error\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{}", r.n, sci(r.error));
        }
        s
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }
}

/// Error `‖∇(u_ref − u^n)‖` of the Kačanov iterates against a reference
/// built by `ref_iters` steps from the interpolant of the exact solution.
pub fn run_experiment1(cfg: &ExperimentConfig) -> Result<IterationStudy> {
    cfg.validate()?;
    let model = cfg.model()?;
    let mesh = cfg.mesh(&model)?;
    let eps = RelaxationPair::new(&model.exponent, cfg.eps_minus, cfg.eps_plus)?;

    let reference_cfg = KacanovConfig {
        outer_tol: 0.0,
        max_outer: cfg.ref_iters,
        ..cfg.kacanov()
    };
    let reference_solver = cfg.solver(&model, &mesh, eps, reference_cfg)?;
    let start = FemFunction::interpolate(Arc::clone(&mesh), |x| model.exact_solution(x));
    let (reference, _) = reference_solver.solve(start)?;

    let solver = cfg.solver(&model, &mesh, eps, cfg.kacanov())?;
    let mut rows = Vec::new();
    let mut failure = None;
    let (_, trace) = solver.solve_observed(cfg.initial_guess(&model, &mesh), |n, u| {
        match h1_seminorm_diff(&reference, u) {
            Ok(error) => rows.push(IterationRow { n, error }),
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(IterationStudy {
        rows,
        converged: trace.converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationRow {
    pub k: i32,
    pub eps_minus: f64,
    pub eps_plus: f64,
    pub error: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationStudy {
    pub rows: Vec<RelaxationRow>,
    pub reference_converged: bool,
}

impl RelaxationStudy {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,eps_minus,eps_plus,error,iterations,converged\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.k,
                sci(r.eps_minus),
                sci(r.eps_plus),
                sci(r.error),
                r.iterations,
                u8::from(r.converged)
            );
        }
        s
    }
}

/// Error `‖∇(u_k − u_ref)‖` of the solutions for `eps_± = base^{∓k}`
/// against the solution for the configured extreme cut-offs.
pub fn run_experiment2(cfg: &ExperimentConfig) -> Result<RelaxationStudy> {
    cfg.validate()?;
    let model = cfg.model()?;
    let mesh = cfg.mesh(&model)?;
    let reference_eps = RelaxationPair::new(&model.exponent, cfg.eps_minus, cfg.eps_plus)?;
    let reference_solver = cfg.solver(&model, &mesh, reference_eps, cfg.kacanov())?;
    let (reference, reference_trace) = reference_solver.solve(FemFunction::zeros(Arc::clone(&mesh)))?;

    let mut rows = Vec::new();
    let mut previous: Option<FemFunction> = None;
    for k in cfg.k_min..=cfg.k_max {
        let eps = RelaxationPair::geometric(&model.exponent, cfg.eps_base, k)?;
        let u0 = match (&previous, cfg.warm_start) {
            (Some(u), true) => u.clone(),
            _ => FemFunction::zeros(Arc::clone(&mesh)),
        };
        let outcome = cfg
            .solver(&model, &mesh, eps, cfg.kacanov())
            .and_then(|s| s.solve(u0));
        let row = match outcome {
            Ok((u, trace)) => {
                let row = RelaxationRow {
                    k,
                    eps_minus: eps.eps_minus,
                    eps_plus: eps.eps_plus,
                    error: h1_seminorm_diff(&u, &reference)?,
                    iterations: trace.iterations(),
                    converged: trace.converged,
                };
                previous = Some(u);
                row
            }
            Err(Error::InnerSolver(_)) => RelaxationRow {
                k,
                eps_minus: eps.eps_minus,
                eps_plus: eps.eps_plus,
                error: f64::NAN,
                iterations: 0,
                converged: false,
            },
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    Ok(RelaxationStudy {
        rows,
        reference_converged: reference_trace.converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementRow {
    pub level: u32,
    pub elements: usize,
    pub error: f64,
    /// `log2(e_{N−1} / e_N)`; absent on the coarsest level.
    pub rate: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementStudy {
    pub rows: Vec<RefinementRow>,
}

impl RefinementStudy {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("elements,error,rate,iterations,converged\n");
        for r in &self.rows {
            let rate = r.rate.map(sci).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.elements,
                sci(r.error),
                rate,
                r.iterations,
                u8::from(r.converged)
            );
        }
        s
    }

    pub fn rates(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rate).collect()
    }
}

/// H¹ error to the exact solution of the relaxed discrete solutions on a
/// chain of uniformly refined meshes.
pub fn run_experiment3(cfg: &ExperimentConfig) -> Result<RefinementStudy> {
    cfg.validate()?;
    let model = cfg.model()?;
    let eps = RelaxationPair::new(&model.exponent, cfg.eps_minus, cfg.eps_plus)?;
    let error_rule = QuadratureRule::seven_point();
    let mut mesh = Arc::new(cfg.initial_mesh(&model)?);
    let mut rows: Vec<RefinementRow> = Vec::new();
    for level in 0..=cfg.refines {
        if level > 0 {
            mesh = Arc::new(mesh.refine_uniform()?);
        }
        let solver = cfg.solver(&model, &mesh, eps, cfg.kacanov())?;
        let (u, trace) = solver.solve(FemFunction::zeros(Arc::clone(&mesh)))?;
        let error = solver
            .discretization()
            .h1_error_to(&u, |x| model.exact_gradient(x), &error_rule)?;
        let rate = rows.last().map(|prev| (prev.error / error).log2());
        rows.push(RefinementRow {
            level,
            elements: mesh.num_triangles(),
            error,
            rate,
            iterations: trace.iterations(),
            converged: trace.converged,
        });
    }
    Ok(RefinementStudy { rows })
}

/// Runs an experiment and renders its CSV table.
pub fn run_to_csv(experiment: Experiment, cfg: &ExperimentConfig) -> Result<String> {
    Ok(match experiment {
        Experiment::Iteration => run_experiment1(cfg)?.to_csv(),
        Experiment::Relaxation => run_experiment2(cfg)?.to_csv(),
        Experiment::Refinement => run_experiment3(cfg)?.to_csv(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_overrides_defaults() {
        let mut cfg = ExperimentConfig::defaults(Experiment::Relaxation, ProblemId::Meq1);
        cfg.apply_text(
            "# sweep\nproblem = meq2\nmesh_n = 8\neps_base=1.5 # comment\nk_max = 5\nwarm_start = true\n",
        )
        .unwrap();
        assert_eq!(cfg.problem, ProblemId::Meq2);
        assert_eq!(cfg.mesh_n, 8);
        assert_eq!(cfg.eps_base, 1.5);
        assert_eq!(cfg.k_max, 5);
        assert!(cfg.warm_start);
        assert_eq!(cfg.damping, Damping::Fixed(default_delta(ProblemId::Meq2)));
    }

    #[test]
    fn config_rejects_garbage() {
        let mut cfg = ExperimentConfig::defaults(Experiment::Iteration, ProblemId::Meq1);
        assert!(cfg.apply_text("mesh_n = lots").is_err());
        assert!(cfg.apply_text("unknown_key = 1").is_err());
        assert!(cfg.apply_text("no equals sign").is_err());
        assert!(cfg.set("damping", "newton").is_err());
    }

    #[test]
    fn zero_continuation_index_is_a_config_error() {
        let mut cfg = ExperimentConfig::defaults(Experiment::Relaxation, ProblemId::Meq1);
        cfg.k_min = 0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert!(run_experiment2(&cfg).is_err());
    }

    #[test]
    fn element_cap_is_enforced() {
        let mut cfg = ExperimentConfig::defaults(Experiment::Refinement, ProblemId::Meq1);
        cfg.refines = 12;
        assert!(cfg.validate().is_err());
        cfg.refines = 5;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn damping_keys() {
        let mut cfg = ExperimentConfig::defaults(Experiment::Iteration, ProblemId::Meq1);
        cfg.set("damping", "theory_safe").unwrap();
        assert_eq!(cfg.damping, Damping::TheorySafe { safety: 0.5 });
        cfg.set("safety", "0.25").unwrap();
        assert_eq!(cfg.damping, Damping::TheorySafe { safety: 0.25 });
        cfg.set("delta", "0.7").unwrap();
        assert_eq!(cfg.damping, Damping::Fixed(0.7));
    }
}
