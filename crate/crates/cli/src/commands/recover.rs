//! `recover`: ISTA/FISTA on seeded planted instances and a recovery-rate table.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use hilbert_ops::sparse_recovery::{
    debias, fista, ista, optimality_violation, read_matrix_csv, support, RecoveryResult, SensingSystem,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{max_of, metrics, open, Context};
use crate::config::{at_least, check, non_negative, positive, CommandConfig};
use crate::datagen::sparse_instance;
use crate::error::{CliError, CliResult};
use crate::report::fmt_f64;

/// Largest debiased coefficient error that still counts as exact recovery.
pub const RECOVERY_ATOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Ista,
    Fista,
    Both,
}

impl SolverChoice {
    fn solvers(self) -> &'static [Solver] {
        match self {
            SolverChoice::Ista => &[Solver::Ista],
            SolverChoice::Fista => &[Solver::Fista],
            SolverChoice::Both => &[Solver::Ista, Solver::Fista],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Ista,
    Fista,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Ista => "ista",
            Solver::Fista => "fista",
        }
    }

    pub fn solve(self, y: &[f64], sys: &SensingSystem, cfg: &RecoverConfig) -> hilbert_ops::Result<RecoveryResult> {
        match self {
            Solver::Ista => ista(y, sys, cfg.mu, cfg.max_iters, cfg.tol),
            Solver::Fista => fista(y, sys, cfg.mu, cfg.max_iters, cfg.tol),
        }
    }
}

#[derive(Debug, Default, Args, Serialize)]
pub struct RecoverArgs {
    /// Signal length N.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of measurements m.
    #[arg(long)]
    pub m: Option<usize>,
    /// Sparsity k.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// ℓ1 weight μ.
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverChoice>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Stop once the objective changes by less than this.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Sensing matrix CSV; switches to a single user-supplied problem.
    #[arg(long)]
    pub phi: Option<String>,
    /// Dictionary CSV (identity if absent).
    #[arg(long)]
    pub psi: Option<String>,
    /// Measurement CSV, one value per row.
    #[arg(long)]
    pub y: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoverConfig {
    pub seed: Option<u64>,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub trials: usize,
    pub mu: f64,
    pub solver: SolverChoice,
    pub max_iters: usize,
    pub tol: f64,
    pub phi: Option<String>,
    pub psi: Option<String>,
    pub y: Option<String>,
}

impl Default for RecoverConfig {
    fn default() -> Self {
        Self {
            seed: None,
            n: 64,
            m: 32,
            k: 4,
            trials: 20,
            mu: 1e-4,
            solver: SolverChoice::Both,
            max_iters: 200_000,
            tol: 1e-14,
            phi: None,
            psi: None,
            y: None,
        }
    }
}

impl CommandConfig for RecoverConfig {
    fn seed(&self) -> Option<u64> {
        self.seed
    }

    fn validate(&self) -> CliResult<()> {
        positive("mu", self.mu)?;
        non_negative("tol", self.tol)?;
        at_least("n", self.n, 1)?;
        at_least("m", self.m, 1)?;
        at_least("trials", self.trials, 1)?;
        at_least("max_iters", self.max_iters, 1)?;
        check(self.k <= self.n, || format!("k ({}) exceeds n ({})", self.k, self.n))?;
        check(self.phi.is_some() == self.y.is_some(), || "phi and y must be given together".into())?;
        check(self.psi.is_none() || self.phi.is_some(), || "psi needs phi and y".into())
    }
}

/// One solver run on one planted instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub solver: Solver,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub monotone: bool,
    pub violation: f64,
    /// `‖Aᵀ(Aα − y)‖_∞`, at most `μ` at an exact minimizer.
    pub gradient_inf: f64,
    /// Debiased support equals the planted one.
    pub support_exact: bool,
    /// Largest debiased coefficient error; infinite when debiasing failed.
    pub max_error: f64,
}

impl TrialResult {
    pub fn recovered(&self) -> bool {
        self.support_exact && self.max_error <= RECOVERY_ATOL
    }
}

fn is_monotone(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] <= w[0])
}

/// Runs every trial in parallel and returns the results in trial order.
pub fn run_trials(cfg: &RecoverConfig) -> CliResult<Vec<TrialResult>> {
    let seed = cfg.seed.unwrap_or_default();
    let per_trial: Vec<CliResult<Vec<TrialResult>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let inst = sparse_instance(seed, t as u32, cfg.n, cfg.m, cfg.k)?;
            let truth = support(&inst.alpha);
            cfg.solver
                .solvers()
                .iter()
                .map(|&solver| {
                    let r = solver.solve(&inst.y, &inst.system, cfg)?;
                    let violation = optimality_violation(&r.alpha, &inst.y, &inst.system, cfg.mu)?;
                    let residual = inst.system.measure(&r.alpha)?.iter().zip(&inst.y).map(|(p, y)| p - y).collect::<Vec<_>>();
                    let a = inst.system.a();
                    let gradient_inf = (0..a.ncols())
                        .map(|j| (0..a.nrows()).map(|i| a[(i, j)] * residual[i]).sum::<f64>().abs())
                        .fold(0.0, f64::max);
                    let (support_exact, max_error) = match debias(&r.alpha, &inst.y, &inst.system) {
                        Ok(d) => (
                            support(&d) == truth,
                            d.iter().zip(&inst.alpha).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
                        ),
                        Err(_) => (false, f64::INFINITY),
                    };
                    Ok(TrialResult {
                        trial: t,
                        solver,
                        iterations: r.iterations,
                        converged: r.converged,
                        final_objective: r.final_objective(),
                        monotone: is_monotone(&r.objective_trace),
                        violation,
                        gradient_inf,
                        support_exact,
                        max_error,
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in per_trial {
        out.extend(r?);
    }
    Ok(out)
}

pub const TABLE_HEADER: [&str; 10] = [
    "trial",
    "solver",
    "iterations",
    "converged",
    "final_objective",
    "monotone",
    "violation",
    "gradient_inf",
    "support_exact",
    "max_error",
];

pub fn table_rows(results: &[TrialResult]) -> Vec<Vec<String>> {
    results
        .iter()
        .map(|r| {
            vec![
                r.trial.to_string(),
                r.solver.name().to_string(),
                r.iterations.to_string(),
                r.converged.to_string(),
                fmt_f64(r.final_objective),
                r.monotone.to_string(),
                fmt_f64(r.violation),
                fmt_f64(r.gradient_inf),
                r.support_exact.to_string(),
                fmt_f64(r.max_error),
            ]
        })
        .collect()
}

/// Fraction of trials recovered exactly by `solver`.
pub fn recovery_rate(results: &[TrialResult], solver: Solver) -> f64 {
    let runs: Vec<_> = results.iter().filter(|r| r.solver == solver).collect();
    runs.iter().filter(|r| r.recovered()).count() as f64 / runs.len().max(1) as f64
}

fn read_vector(path: &str) -> CliResult<Vec<f64>> {
    let m = read_matrix_csv(open(path)?)?;
    if m.ncols() != 1 {
        return Err(CliError::Module(hilbert_ops::Error::Parse(format!(
            "{path}: expected one column, found {}",
            m.ncols()
        ))));
    }
    Ok(m.iter().copied().collect())
}

fn run_single(cfg: &RecoverConfig, ctx: &Context) -> CliResult<PathBuf> {
    let (phi_path, y_path) = (cfg.phi.as_deref().expect("validated"), cfg.y.as_deref().expect("validated"));
    let phi = read_matrix_csv(open(phi_path)?)?;
    let sys = match &cfg.psi {
        Some(p) => SensingSystem::new(phi, read_matrix_csv(open(p)?)?)?,
        None => SensingSystem::with_identity_dictionary(phi)?,
    };
    let y = read_vector(y_path)?;
    let mut out = ctx.output()?;
    let mut m = Map::new();
    let mut rows = Vec::new();
    for &solver in cfg.solver.solvers() {
        let r = solver.solve(&y, &sys, cfg)?;
        let violation = optimality_violation(&r.alpha, &y, &sys, cfg.mu)?;
        let name = solver.name();
        m.insert(format!("{name}_iterations"), json!(r.iterations));
        m.insert(format!("{name}_final_objective"), json!(r.final_objective()));
        m.insert(format!("{name}_violation"), json!(violation));
        m.insert(format!("{name}_support_size"), json!(support(&r.alpha).len()));
        m.insert(format!("{name}_monotone"), Value::Bool(is_monotone(&r.objective_trace)));
        for (i, a) in r.alpha.iter().enumerate() {
            rows.push(vec![name.to_string(), i.to_string(), fmt_f64(*a)]);
        }
    }
    out.write_table("alpha.csv", &["solver", "index", "value"], &rows)?;
    out.finish("recover", cfg, m, sys.warnings().to_vec())
}

pub fn run(args: &RecoverArgs, ctx: &Context) -> CliResult<PathBuf> {
    let cfg: RecoverConfig = ctx.resolve(args)?;
    if cfg.phi.is_some() {
        return run_single(&cfg, ctx);
    }
    let results = run_trials(&cfg)?;
    let mut out = ctx.output()?;
    out.write_table("recovery.csv", &TABLE_HEADER, &table_rows(&results))?;
    let mut m = json!({ "trials": cfg.trials });
    for &solver in cfg.solver.solvers() {
        let runs: Vec<&TrialResult> = results.iter().filter(|r| r.solver == solver).collect();
        let name = solver.name();
        m[format!("{name}_recovery_rate")] = json!(recovery_rate(&results, solver));
        m[format!("{name}_all_converged")] = json!(runs.iter().all(|r| r.converged));
        m[format!("{name}_all_monotone")] = json!(runs.iter().all(|r| r.monotone));
        m[format!("{name}_max_violation")] = json!(max_of(runs.iter().map(|r| r.violation)));
        m[format!("{name}_max_gradient_inf")] = json!(max_of(runs.iter().map(|r| r.gradient_inf)));
        m[format!("{name}_mean_iterations")] =
            json!(runs.iter().map(|r| r.iterations as f64).sum::<f64>() / runs.len().max(1) as f64);
    }
    out.finish("recover", &cfg, metrics(m), Vec::new())
}
