use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pxkacanov::experiments::{run_to_csv, Experiment, ExperimentConfig};
use pxkacanov::problems::ProblemId;

/// Convergence studies for the damped Kačanov iteration on relaxed
/// p(x)-Poisson model problems.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error of the Kačanov iterates against a long-run reference.
    Exp1(Options),
    /// Error of relaxed solutions for eps = base^(-k), base^k against the extreme-eps solution.
    Exp2(Options),
    /// H1 error to the exact solution under uniform mesh refinement.
    Exp3(Options),
}

#[derive(Args)]
struct Options {
    /// meq1 (default) or meq2
    #[arg(long)]
    problem: Option<ProblemId>,
    /// key = value file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    mesh_n: Option<usize>,
    #[arg(long)]
    refines: Option<u32>,
    #[arg(long)]
    eps_minus: Option<f64>,
    #[arg(long)]
    eps_plus: Option<f64>,
    #[arg(long)]
    eps_base: Option<f64>,
    #[arg(long)]
    k_min: Option<i32>,
    #[arg(long)]
    k_max: Option<i32>,
    /// Fixed damping factor in (0, 1].
    #[arg(long, conflicts_with = "safety")]
    delta: Option<f64>,
    /// Use delta = safety * delta_max (guaranteed energy decay).
    #[arg(long)]
    safety: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    ref_iters: Option<usize>,
    /// default | zero | sinxy | interpolant
    #[arg(long)]
    initial: Option<String>,
    #[arg(long)]
    warm_start: bool,
    /// Solve the p = 2 Poisson problem instead (self-test).
    #[arg(long)]
    linear: bool,
    #[arg(long)]
    seed: Option<u64>,
}

impl Options {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut kv = Vec::new();
        let mut push = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                kv.push((k, v));
            }
        };
        push("mesh_n", self.mesh_n.map(|v| v.to_string()));
        push("refines", self.refines.map(|v| v.to_string()));
        push("eps_minus", self.eps_minus.map(|v| v.to_string()));
        push("eps_plus", self.eps_plus.map(|v| v.to_string()));
        push("eps_base", self.eps_base.map(|v| v.to_string()));
        push("k_min", self.k_min.map(|v| v.to_string()));
        push("k_max", self.k_max.map(|v| v.to_string()));
        push("delta", self.delta.map(|v| v.to_string()));
        push("safety", self.safety.map(|v| v.to_string()));
        push("tol", self.tol.map(|v| v.to_string()));
        push("max_iter", self.max_iter.map(|v| v.to_string()));
        push("ref_iters", self.ref_iters.map(|v| v.to_string()));
        push("initial", self.initial.clone());
        push("warm_start", self.warm_start.then(|| "true".into()));
        push("linear", self.linear.then(|| "true".into()));
        push("seed", self.seed.map(|v| v.to_string()));
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        kv
    }

    fn build(&self, experiment: Experiment) -> pxkacanov::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::defaults(experiment, self.problem.unwrap_or(ProblemId::Meq1));
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if let Some(problem) = self.problem {
            cfg.set("problem", &problem.to_string())?;
        }
        for (k, v) in self.overrides() {
            cfg.set(k, &v)?;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> pxkacanov::Result<()> {
    let (experiment, options) = match &cli.command {
        Command::Exp1(o) => (Experiment::Iteration, o),
        Command::Exp2(o) => (Experiment::Relaxation, o),
        Command::Exp3(o) => (Experiment::Refinement, o),
    };
    let cfg = options.build(experiment)?;
    let csv = run_to_csv(experiment, &cfg)?;
    match &cfg.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
