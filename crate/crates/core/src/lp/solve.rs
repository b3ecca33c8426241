use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, SupportedConeT,
    ZeroConeT,
};
use serde::{Deserialize, Serialize};

use super::{LpModel, Sense, VarId};
use crate::error::{Error, Result};

/// LP solver implementation behind [`solve`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Primal-dual interior-point method (Clarabel).
    #[default]
    InteriorPoint,
    /// Dual simplex (microlp); vertex solutions, best for small models.
    Simplex,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub backend: Backend,
    /// Target scaled row/bound violation; optimal points beyond ten times
    /// this (and beyond 1e-8) are reported as numerical failures.
    pub feasibility_tol: f64,
    /// Duality-gap tolerance handed to the interior-point method.
    pub optimality_tol: f64,
    pub max_iter: u32,
    pub time_limit_secs: Option<f64>,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            backend: Backend::InteriorPoint,
            feasibility_tol: 1e-6,
            optimality_tol: 1e-8,
            max_iter: 400,
            time_limit_secs: None,
            verbose: false,
        }
    }
}

impl SolverOptions {
    pub fn simplex() -> Self {
        SolverOptions { backend: Backend::Simplex, ..Default::default() }
    }

    pub fn with_tolerances(mut self, feasibility: f64, optimality: f64) -> Self {
        self.feasibility_tol = feasibility;
        self.optimality_tol = optimality;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: u32,
    pub wall_time_secs: f64,
    pub max_violation: f64,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values, projected onto the variable bounds. Empty when the
    /// backend produced no point.
    pub x: Vec<f64>,
    pub objective: f64,
    pub stats: SolveStats,
    pub message: Option<String>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.x[v.index()]
    }

    pub fn values(&self, vars: &[VarId]) -> Vec<f64> {
        vars.iter().map(|&v| self.value(v)).collect()
    }

    /// Turns a non-optimal status into an error.
    pub fn into_optimal(self) -> Result<Self> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            LpStatus::Infeasible => Err(Error::Infeasible { violated: Vec::new() }),
            LpStatus::Unbounded => Err(Error::Unbounded),
            LpStatus::NumericalFailure => Err(Error::Solver(
                self.message.unwrap_or_else(|| "numerical failure".to_string()),
            )),
        }
    }
}

/// Solves `model` with the configured backend.
///
/// Returns `Err` only for ill-formed models; solver outcomes (including
/// breakdowns) are reported through [`LpSolution::status`] so batch runs can
/// continue.
pub fn solve(model: &LpModel, opts: &SolverOptions) -> Result<LpSolution> {
    model.validate()?;
    let start = Instant::now();
    let mut sol = match opts.backend {
        Backend::InteriorPoint => solve_interior_point(model, opts),
        Backend::Simplex => solve_simplex(model, opts),
    };
    if !sol.x.is_empty() {
        for (i, xi) in sol.x.iter_mut().enumerate() {
            *xi = xi.clamp(model.lower[i], model.upper[i]);
        }
        sol.stats.max_violation = model.max_violation(&sol.x);
        sol.objective = model.objective_value(&sol.x);
        // The backend bounds a residual norm, so single rows may exceed the
        // tolerance slightly.
        let guard = (10.0 * opts.feasibility_tol).max(1e-8);
        if sol.status == LpStatus::Optimal && sol.stats.max_violation > guard {
            sol.message = Some(format!(
                "solution violates rows by {:.3e} (tolerance {:.1e})",
                sol.stats.max_violation, opts.feasibility_tol
            ));
            sol.status = LpStatus::NumericalFailure;
        }
    }
    sol.stats.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(sol)
}

fn solve_interior_point(model: &LpModel, opts: &SolverOptions) -> LpSolution {
    let n = model.num_vars();
    let mut ri: Vec<usize> = Vec::with_capacity(model.num_nonzeros() + 2 * n);
    let mut ci: Vec<usize> = Vec::with_capacity(ri.capacity());
    let mut vv: Vec<f64> = Vec::with_capacity(ri.capacity());
    let mut b: Vec<f64> = Vec::new();

    // Clarabel form: A x + s = b with s in the zero cone (equalities) followed
    // by the nonnegative orthant (inequalities and finite bounds).
    let mut push_row = |coeffs: &mut dyn Iterator<Item = (usize, f64)>, rhs: f64, b: &mut Vec<f64>| {
        let r = b.len();
        for (j, c) in coeffs {
            ri.push(r);
            ci.push(j);
            vv.push(c);
        }
        b.push(rhs);
    };

    for row in model.rows().filter(|r| r.sense == Sense::Eq) {
        push_row(&mut row.cols.iter().zip(row.vals).map(|(v, &c)| (v.index(), c)), row.rhs, &mut b);
    }
    for j in 0..n {
        if model.lower[j] == model.upper[j] {
            push_row(&mut std::iter::once((j, 1.0)), model.lower[j], &mut b);
        }
    }
    let n_zero = b.len();
    for row in model.rows() {
        match row.sense {
            Sense::Le => push_row(
                &mut row.cols.iter().zip(row.vals).map(|(v, &c)| (v.index(), c)),
                row.rhs,
                &mut b,
            ),
            Sense::Ge => push_row(
                &mut row.cols.iter().zip(row.vals).map(|(v, &c)| (v.index(), -c)),
                -row.rhs,
                &mut b,
            ),
            Sense::Eq => {}
        }
    }
    for j in 0..n {
        let (lo, hi) = (model.lower[j], model.upper[j]);
        if lo == hi {
            continue;
        }
        if lo.is_finite() {
            push_row(&mut std::iter::once((j, -1.0)), -lo, &mut b);
        }
        if hi.is_finite() {
            push_row(&mut std::iter::once((j, 1.0)), hi, &mut b);
        }
    }
    let m = b.len();
    let n_nonneg = m - n_zero;

    let a = CscMatrix::new_from_triplets(m, n, ri, ci, vv);
    let p = CscMatrix::<f64>::zeros((n, n));
    let q = model.objective.clone();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    if n_zero > 0 {
        cones.push(ZeroConeT(n_zero));
    }
    if n_nonneg > 0 {
        cones.push(NonnegativeConeT(n_nonneg));
    }

    let tol = opts.optimality_tol;
    let mut builder = DefaultSettingsBuilder::<f64>::default();
    builder
        .verbose(opts.verbose)
        .max_iter(opts.max_iter)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_feas(tol.min(1e-8))
        .max_threads(1);
    if let Some(t) = opts.time_limit_secs {
        builder.time_limit(t);
    }
    let settings = match builder.build() {
        Ok(s) => s,
        Err(e) => return failure(format!("invalid solver settings: {e}")),
    };

    if m == 0 {
        // Only free variables: bounded iff the objective vanishes.
        return if q.iter().all(|&c| c == 0.0) {
            LpSolution {
                status: LpStatus::Optimal,
                x: vec![0.0; n],
                objective: 0.0,
                stats: SolveStats::default(),
                message: None,
            }
        } else {
            LpSolution {
                status: LpStatus::Unbounded,
                x: Vec::new(),
                objective: f64::NEG_INFINITY,
                stats: SolveStats::default(),
                message: None,
            }
        };
    }

    let mut solver = match DefaultSolver::new(&p, &q, &a, &b, &cones, settings) {
        Ok(s) => s,
        Err(e) => return failure(format!("solver setup failed: {e}")),
    };
    solver.solve();
    let s = &solver.solution;
    let stats = SolveStats { iterations: s.iterations, ..Default::default() };
    let (status, keep_x) = match s.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => (LpStatus::Optimal, true),
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => (LpStatus::Infeasible, false),
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => (LpStatus::Unbounded, false),
        _ => (LpStatus::NumericalFailure, true),
    };
    let message = (status == LpStatus::NumericalFailure).then(|| format!("interior point stopped: {:?}", s.status));
    LpSolution {
        status,
        x: if keep_x { s.x.clone() } else { Vec::new() },
        objective: s.obj_val,
        stats,
        message,
    }
}

fn solve_simplex(model: &LpModel, opts: &SolverOptions) -> LpSolution {
    use microlp::{ComparisonOp, OptimizationDirection, Problem};

    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<microlp::Variable> = (0..model.num_vars())
        .map(|j| problem.add_var(model.objective[j], (model.lower[j], model.upper[j])))
        .collect();
    for row in model.rows() {
        let op = match row.sense {
            Sense::Le => ComparisonOp::Le,
            Sense::Eq => ComparisonOp::Eq,
            Sense::Ge => ComparisonOp::Ge,
        };
        let expr: microlp::LinearExpr =
            row.cols.iter().zip(row.vals).map(|(v, &c)| (vars[v.index()], c)).collect();
        problem.add_constraint(expr, op, row.rhs);
    }
    if let Some(t) = opts.time_limit_secs {
        problem.set_time_limit(std::time::Duration::from_secs_f64(t));
    }
    match problem.solve() {
        Ok(microlp::SolveOutcome::Solution(sol)) => {
            let x: Vec<f64> = vars.iter().map(|&v| sol.var_value(v)).collect();
            LpSolution {
                status: LpStatus::Optimal,
                objective: model.objective_value(&x),
                x,
                stats: SolveStats::default(),
                message: None,
            }
        }
        Ok(microlp::SolveOutcome::Interrupted(_)) => failure("simplex interrupted by time limit".into()),
        Err(microlp::Error::Infeasible) => LpSolution {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            objective: f64::NAN,
            stats: SolveStats::default(),
            message: None,
        },
        Err(microlp::Error::Unbounded) => LpSolution {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            objective: f64::NEG_INFINITY,
            stats: SolveStats::default(),
            message: None,
        },
        Err(e) => failure(format!("simplex failed: {e}")),
    }
}

fn failure(message: String) -> LpSolution {
    LpSolution {
        status: LpStatus::NumericalFailure,
        x: Vec::new(),
        objective: f64::NAN,
        stats: SolveStats::default(),
        message: Some(message),
    }
}
