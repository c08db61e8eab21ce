//! Minimizers for compiled problems: preconditioned CG for quadratic
//! energies, multistart L-BFGS for smooth nonconvex ones, coordinate search
//! for tabulated potentials, plus dense and grid oracles.

mod cg;
mod dense;
mod grid;
mod lbfgs;

pub use cg::{pcg, CgOutcome, LinearOperator};
pub use dense::{solve_dense, stiffness, MAX_DENSE_UNKNOWNS};
pub use grid::{grid_search, GridOutcome, GridSpec, MAX_GRID_EVALS, MAX_GRID_POINTS, MAX_GRID_UNKNOWNS};
pub use lbfgs::{coordinate_descent, lbfgs, DescentOutcome, LbfgsParams, Objective};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::Problem;
use crate::error::{Error, Result};
use crate::util::{hash_words, norm2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// CG for quadratic potentials, L-BFGS for smooth ones, coordinate
    /// search otherwise.
    #[default]
    Auto,
    ConjugateGradient,
    Lbfgs,
    CoordinateDescent,
    OracleDense,
    OracleGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub method: Method,
    /// Relative gradient-norm threshold.
    pub tol: f64,
    pub max_iter: usize,
    pub n_start: usize,
    pub backtrack: f64,
    pub armijo: f64,
    pub memory: usize,
    pub seed: u64,
    /// Start perturbation amplitude; defaults to 0.5·(1 + |F|).
    pub amplitude: Option<f64>,
    /// Fail with `NoConvergence` instead of returning an unconverged result.
    pub strict: bool,
    /// Emit JSON-lines iteration records on stderr.
    pub trace: bool,
    pub grid_points: usize,
    pub grid_half_width: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Auto,
            tol: 1e-8,
            max_iter: 20_000,
            n_start: 8,
            backtrack: 0.5,
            armijo: 1e-4,
            memory: 10,
            seed: 0,
            amplitude: None,
            strict: true,
            trace: false,
            grid_points: 41,
            grid_half_width: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub value: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
    pub best_start: usize,
    pub converged: bool,
    /// Final value of every start, in start order.
    pub start_values: Vec<f64>,
}

impl Objective for Problem {
    fn dim(&self) -> usize {
        Problem::dim(self)
    }
    fn value(&self, x: &[f64]) -> f64 {
        Problem::value(self, x)
    }
    fn value_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
        Problem::value_grad(self, x, g)
    }
}

/// The Hessian of a quadratic problem as a linear operator.
pub struct QuadraticOperator<'a>(pub &'a Problem);

impl LinearOperator for QuadraticOperator<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.0.hess_vec(v, out)
    }
    fn diagonal(&self) -> Vec<f64> {
        self.0.jacobi_diag()
    }
    fn project(&self, v: &mut [f64]) {
        self.0.project_mean_zero(v)
    }
}

/// Copy of a periodic problem with the first slot fixed to zero.
pub fn pinned(problem: &Problem) -> Problem {
    let mut p = problem.clone();
    if !p.translation_gauge || p.free_slots.is_empty() {
        return p;
    }
    let s0 = p.free_slots[0] as usize;
    p.free_slots.remove(0);
    p.dof_of[s0] = u32::MAX;
    for (j, &s) in p.free_slots.iter().enumerate() {
        p.dof_of[s as usize] = j as u32;
    }
    p.translation_gauge = false;
    p
}

fn pin_x(problem: &Problem, x: &[f64]) -> Vec<f64> {
    let n = problem.n;
    (n..x.len()).map(|i| x[i] - x[i % n]).collect()
}

fn unpin_x(problem: &Problem, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; problem.n];
    out.extend_from_slice(x);
    out
}

fn resolve(problem: &Problem, method: Method) -> Method {
    match method {
        Method::Auto if problem.potential.is_quadratic() => Method::ConjugateGradient,
        Method::Auto if problem.potential.is_smooth() => Method::Lbfgs,
        Method::Auto => Method::CoordinateDescent,
        m => m,
    }
}

fn default_amplitude(problem: &Problem, cfg: &SolverConfig) -> f64 {
    cfg.amplitude.unwrap_or_else(|| {
        let f = problem.periodic.as_ref().map(|(_, f)| norm2(f)).unwrap_or(0.0);
        0.5 * (1.0 + f)
    })
}

fn trace(cfg: &SolverConfig, start: usize, history: &[(f64, f64)]) {
    if cfg.trace {
        for (it, (f, g)) in history.iter().enumerate() {
            eprintln!("{}", serde_json::json!({"start": start, "iteration": it + 1, "objective": f, "grad_norm": g}));
        }
    }
}

/// Minimizes a compiled problem. `x0` is an optional warm start (zero
/// corrector otherwise). For nonconvex potentials the result is the best of
/// `n_start` descents and is an upper bound on the infimum.
pub fn minimize(problem: &Problem, cfg: &SolverConfig, x0: Option<&[f64]>) -> Result<SolveResult> {
    if !(cfg.tol > 0.0) {
        return Err(Error::InvalidSpec("solver tolerance must be positive".into()));
    }
    let dim = problem.dim();
    let start = x0.map(|x| x.to_vec()).unwrap_or_else(|| vec![0.0; dim]);
    if dim == 0 {
        return Ok(SolveResult {
            value: problem.value(&[]),
            x: Vec::new(),
            iterations: 0,
            grad_norm: 0.0,
            best_start: 0,
            converged: true,
            start_values: vec![problem.value(&[])],
        });
    }
    let result = match resolve(problem, cfg.method) {
        Method::ConjugateGradient => {
            if !problem.potential.is_quadratic() {
                return Err(Error::NotQuadratic);
            }
            let mut g0 = vec![0.0; dim];
            problem.value_grad(&vec![0.0; dim], &mut g0);
            let b: Vec<f64> = g0.iter().map(|v| -v).collect();
            let out = pcg(&QuadraticOperator(problem), &b, &start, cfg.tol, cfg.max_iter.max(10 * dim))?;
            finish(problem, out.x, out.iterations, out.converged)
        }
        Method::OracleDense => {
            if !problem.potential.is_quadratic() {
                return Err(Error::NotQuadratic);
            }
            finish(problem, solve_dense(problem)?, 1, true)
        }
        Method::OracleGrid => return oracle_grid(problem, cfg, x0),
        m @ (Method::Lbfgs | Method::CoordinateDescent) => multistart(problem, cfg, &start, m)?,
        Method::Auto => unreachable!("resolved above"),
    };
    if cfg.strict && !result.converged {
        return Err(Error::NoConvergence { iterations: result.iterations, grad_norm: result.grad_norm });
    }
    Ok(result)
}

fn finish(problem: &Problem, x: Vec<f64>, iterations: usize, converged: bool) -> SolveResult {
    let mut g = vec![0.0; x.len()];
    let value = problem.value_grad(&x, &mut g);
    let mut gp = g.clone();
    problem.project_mean_zero(&mut gp);
    SolveResult {
        value,
        x,
        iterations,
        grad_norm: norm2(&gp),
        best_start: 0,
        converged,
        start_values: vec![value],
    }
}

fn multistart(problem: &Problem, cfg: &SolverConfig, start: &[f64], method: Method) -> Result<SolveResult> {
    let gauge = problem.translation_gauge;
    let work = if gauge { pinned(problem) } else { problem.clone() };
    let base = if gauge { pin_x(problem, start) } else { start.to_vec() };
    let amp = default_amplitude(problem, cfg);
    let params = LbfgsParams {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        memory: cfg.memory,
        backtrack: cfg.backtrack,
        armijo: cfg.armijo,
    };
    let runs: Vec<DescentOutcome> = (0..cfg.n_start.max(1))
        .into_par_iter()
        .map(|s| {
            let mut x = base.clone();
            if s > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(hash_words(&[cfg.seed, s as u64]));
                let normal = Normal::new(0.0, amp).expect("finite amplitude");
                x.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
            }
            match method {
                Method::CoordinateDescent => coordinate_descent(&work, &x, amp, cfg.tol, cfg.max_iter),
                _ => lbfgs(&work, &x, &params),
            }
        })
        .collect();
    let mut best = 0;
    for (s, r) in runs.iter().enumerate() {
        trace(cfg, s, &r.history);
        if r.value < runs[best].value {
            best = s;
        }
    }
    let r = &runs[best];
    let mut x = if gauge { unpin_x(problem, &r.x) } else { r.x.clone() };
    problem.project_mean_zero(&mut x);
    Ok(SolveResult {
        value: problem.value(&x),
        x,
        iterations: r.iterations,
        grad_norm: r.grad_norm,
        best_start: best,
        converged: r.converged,
        start_values: runs.iter().map(|r| r.value).collect(),
    })
}

/// Dense factorization oracle for quadratic problems.
pub fn oracle_dense(problem: &Problem) -> Result<SolveResult> {
    if !problem.potential.is_quadratic() {
        return Err(Error::NotQuadratic);
    }
    Ok(finish(problem, solve_dense(problem)?, 1, true))
}

/// Exhaustive tensor-grid search followed by a local polish from the best
/// grid point. Periodic problems are pinned first.
pub fn oracle_grid(problem: &Problem, cfg: &SolverConfig, center: Option<&[f64]>) -> Result<SolveResult> {
    let gauge = problem.translation_gauge;
    let work = if gauge { pinned(problem) } else { problem.clone() };
    let c = center.map(|c| if gauge { pin_x(problem, c) } else { c.to_vec() });
    let spec = GridSpec { points: cfg.grid_points, half_width: cfg.grid_half_width, center: c };
    let g = grid_search(&work, &spec)?;
    let polished = if work.potential.is_smooth() {
        let params = LbfgsParams {
            tol: cfg.tol,
            max_iter: cfg.max_iter,
            memory: cfg.memory,
            backtrack: cfg.backtrack,
            armijo: cfg.armijo,
        };
        lbfgs(&work, &g.x, &params)
    } else {
        coordinate_descent(&work, &g.x, spec.spacing(), cfg.tol, cfg.max_iter)
    };
    let mut x = if gauge { unpin_x(problem, &polished.x) } else { polished.x.clone() };
    problem.project_mean_zero(&mut x);
    Ok(SolveResult {
        value: problem.value(&x),
        x,
        iterations: polished.iterations,
        grad_norm: polished.grad_norm,
        best_start: 0,
        converged: polished.converged,
        start_values: vec![g.value],
    })
}
