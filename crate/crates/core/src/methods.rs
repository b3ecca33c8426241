//! Complete dispatch models: DROTRIMM, DROW and SCENA.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cvar::{emit_cvar_block, extract_chance_rows, CvarParams, ExprCache};
use crate::error::{Error, Result};
use crate::grid::{cost_epigraph_rows, deterministic_rows, Dispatch, DispatchVars, NetworkModel};
use crate::lp::{solve, Label, LinExpr, LpModel, LpSolution, LpStatus, Sense, SolverOptions};
use crate::uncertainty::{
    aggregate_distances, alpha_schedule, context_distances, joint_distances, min_transport_budget, nearest_order,
    Context, JointSampleSet,
};
use crate::worst_case_cost::{emit_worstcase_cost_block, CostParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "DROTRIMM", alias = "drotrimm")]
    Drotrimm,
    #[serde(rename = "DROW", alias = "drow")]
    Drow,
    #[serde(rename = "SCENA", alias = "scena")]
    Scena,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Drotrimm, Method::Drow, Method::Scena];

    pub fn name(self) -> &'static str {
        match self {
            Method::Drotrimm => "DROTRIMM",
            Method::Drow => "DROW",
            Method::Scena => "SCENA",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?}")))
    }
}

/// How the two DRO blocks share the robustness parameter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoMode {
    /// Each block uses its own minimum budget plus the same excess.
    #[default]
    SharedExcess,
    /// Both blocks use the larger of the two minima plus the excess.
    SharedAbsolute,
}

/// Meaning of `rho_excess` for DROW.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusMode {
    /// Radius = minimum budget of the context-free set + `rho_excess`.
    #[default]
    Excess,
    /// Radius = `rho_excess`; rejected when below the minimum budget.
    Absolute,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodConfig {
    pub method: Method,
    pub epsilon: f64,
    /// Budget excess over the minimum transportation budget, MW.
    pub rho_excess: f64,
    /// Fixed trimming level; `None` uses `α_N = ⌊N^0.9⌋/N`.
    pub alpha: Option<f64>,
    /// SCENA neighbour count; `None` uses `⌊N^0.9⌋`.
    pub k_n: Option<usize>,
    pub rho_mode: RhoMode,
    pub drow_radius: RadiusMode,
    /// Weight of the forecast coordinates in the ground metric.
    pub context_scale: f64,
    pub solver: SolverOptions,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            method: Method::Drotrimm,
            epsilon: 0.1,
            rho_excess: 0.0,
            alpha: None,
            k_n: None,
            rho_mode: RhoMode::SharedExcess,
            drow_radius: RadiusMode::Excess,
            context_scale: 1.0,
            solver: SolverOptions::default(),
        }
    }
}

impl MethodConfig {
    pub fn new(method: Method) -> Self {
        MethodConfig { method, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(self.rho_excess >= 0.0) || !self.rho_excess.is_finite() {
            return Err(Error::InvalidParameter(format!("rho_excess must be >= 0, got {}", self.rho_excess)));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1], got {a}")));
            }
        }
        if !(self.context_scale >= 0.0) {
            return Err(Error::InvalidParameter("context_scale must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolutionMeta {
    pub n: usize,
    pub epsilon: f64,
    pub rho_excess: f64,
    pub alpha: Option<f64>,
    pub k_n: Option<usize>,
    pub rho_cc: Option<f64>,
    pub rho_cost: Option<f64>,
    pub rho_min_joint: Option<f64>,
    pub rho_min_agg: Option<f64>,
    pub rho_mode: Option<RhoMode>,
    pub context_scale: f64,
    pub objective_kind: String,
    pub forecast: Vec<f64>,
    pub rows: usize,
    pub vars: usize,
    pub nonzeros: usize,
    pub iterations: u32,
}

/// Solved first-stage decision with provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    pub method: Method,
    #[serde(flatten)]
    pub dispatch: Dispatch,
    /// Worst-case expected cost (DRO methods) or scenario-average cost (SCENA), $.
    pub objective: f64,
    pub status: String,
    pub build_secs: f64,
    pub solve_secs: f64,
    pub meta: SolutionMeta,
}

impl DispatchSolution {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

pub fn solve_method(net: &NetworkModel, samples: &JointSampleSet, ctx: &Context, cfg: &MethodConfig) -> Result<DispatchSolution> {
    match cfg.method {
        Method::Drotrimm => solve_drotrimm(net, samples, ctx, cfg),
        Method::Drow => solve_drow(net, samples, ctx, cfg),
        Method::Scena => solve_scena(net, samples, ctx, cfg),
    }
}

fn check_inputs(net: &NetworkModel, samples: &JointSampleSet, ctx: &Context, cfg: &MethodConfig) -> Result<()> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n_w = net.n_wind();
    for got in [samples.n_farms(), ctx.f.len()] {
        if got != n_w {
            return Err(Error::DimensionMismatch { expected: n_w, got });
        }
    }
    Ok(())
}

/// Trimmings-based contextual DRO.
pub fn solve_drotrimm(net: &NetworkModel, samples: &JointSampleSet, ctx: &Context, cfg: &MethodConfig) -> Result<DispatchSolution> {
    check_inputs(net, samples, ctx, cfg)?;
    let alpha = cfg.alpha.unwrap_or_else(|| alpha_schedule(samples.len()).1);
    let scale = cfg.context_scale;
    let rho_joint = min_transport_budget(&joint_distances(samples, ctx, scale)?, alpha)?;
    let rho_agg = min_transport_budget(&aggregate_distances(samples, ctx, scale)?, alpha)?;
    let (rho_cc, rho_cost) = match cfg.rho_mode {
        RhoMode::SharedExcess => (rho_joint + cfg.rho_excess, rho_agg + cfg.rho_excess),
        RhoMode::SharedAbsolute => {
            let r = rho_joint.max(rho_agg) + cfg.rho_excess;
            (r, r)
        }
    };
    solve_dro(net, samples, ctx, cfg, Method::Drotrimm, alpha, scale, rho_cc, rho_cost, Some(cfg.rho_mode))
}

/// Context-blind Wasserstein DRO: no trimming, no forecast coordinates.
pub fn solve_drow(net: &NetworkModel, samples: &JointSampleSet, ctx: &Context, cfg: &MethodConfig) -> Result<DispatchSolution> {
    check_inputs(net, samples, ctx, cfg)?;
    let (rho_cc, rho_cost) = match cfg.drow_radius {
        RadiusMode::Absolute => (cfg.rho_excess, cfg.rho_excess),
        RadiusMode::Excess => {
            let joint = min_transport_budget(&joint_distances(samples, ctx, 0.0)?, 1.0)?;
            let agg = min_transport_budget(&aggregate_distances(samples, ctx, 0.0)?, 1.0)?;
            match cfg.rho_mode {
                RhoMode::SharedExcess => (joint + cfg.rho_excess, agg + cfg.rho_excess),
                RhoMode::SharedAbsolute => {
                    let r = joint.max(agg) + cfg.rho_excess;
                    (r, r)
                }
            }
        }
    };
    solve_dro(net, samples, ctx, cfg, Method::Drow, 1.0, 0.0, rho_cc, rho_cost, Some(cfg.rho_mode))
}

#[allow(clippy::too_many_arguments)]
fn solve_dro(
    net: &NetworkModel,
    samples: &JointSampleSet,
    ctx: &Context,
    cfg: &MethodConfig,
    method: Method,
    alpha: f64,
    scale: f64,
    rho_cc: f64,
    rho_cost: f64,
    rho_mode: Option<RhoMode>,
) -> Result<DispatchSolution> {
    let start = Instant::now();
    let mut model = LpModel::new();
    let x = DispatchVars::add_to(&mut model, net.n_gen());
    deterministic_rows(net, &ctx.f, &mut model, &x);
    let rows = extract_chance_rows(net, &ctx.f, &x);
    let cost = emit_worstcase_cost_block(
        net,
        &x,
        samples,
        ctx,
        &CostParams { alpha, rho: rho_cost, context_scale: scale },
        &mut model,
    )?;
    model.set_objective(&cost.value);
    let cc = emit_cvar_block(
        &rows,
        samples,
        ctx,
        &CvarParams { alpha, rho: rho_cc, epsilon: cfg.epsilon, context_scale: scale },
        &mut model,
        true,
    )?;
    let meta = SolutionMeta {
        n: samples.len(),
        epsilon: cfg.epsilon,
        rho_excess: cfg.rho_excess,
        alpha: Some(alpha),
        k_n: None,
        rho_cc: Some(rho_cc),
        rho_cost: Some(rho_cost),
        rho_min_joint: Some(cc.rho_min),
        rho_min_agg: Some(cost.rho_min),
        rho_mode,
        context_scale: scale,
        objective_kind: "worst_case_expected_cost".into(),
        forecast: ctx.f.clone(),
        ..Default::default()
    };
    finish(net, ctx, cfg, method, &model, &x, start, meta, "cvar_master")
}

/// Scenario approach on the K_N samples nearest to the context.
pub fn solve_scena(net: &NetworkModel, samples: &JointSampleSet, ctx: &Context, cfg: &MethodConfig) -> Result<DispatchSolution> {
    check_inputs(net, samples, ctx, cfg)?;
    let n = samples.len();
    let k = cfg.k_n.unwrap_or_else(|| alpha_schedule(n).0);
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("K_N must lie in [1, {n}], got {k}")));
    }
    let start = Instant::now();
    let neighbours: Vec<usize> = nearest_order(&context_distances(samples, ctx, 1.0)?)[..k].to_vec();

    let mut model = LpModel::new();
    let x = DispatchVars::add_to(&mut model, net.n_gen());
    deterministic_rows(net, &ctx.f, &mut model, &x);
    let rows = extract_chance_rows(net, &ctx.f, &x);
    let mut cache = ExprCache::new("sc_aux", "sc_aux_def");
    let short: Vec<(Vec<LinExpr>, LinExpr)> = rows
        .iter()
        .map(|r| (r.a1.iter().map(|e| cache.shorten(&mut model, e)).collect(), cache.shorten(&mut model, &r.a2)))
        .collect();
    let mut objective = x.reserve_cost(net);
    for &i in &neighbours {
        let w = samples.w(i);
        for (kk, (a1, a2)) in short.iter().enumerate() {
            let mut e = a2.clone();
            for (m, a) in a1.iter().enumerate() {
                e.add_scaled(a, w[m]);
            }
            model.add_row(Label::at2("scena_row", i, kk), e, Sense::Le, 0.0);
        }
        let omega = samples.omega_hat()[i];
        for (j, gen) in net.generators.iter().enumerate() {
            let t = model.add_free_var(Label::at2("scena_t", i, j));
            cost_epigraph_rows(&mut model, gen, t, &x.output_at(j, omega), |s| Label::at3("scena_epi", i, j, s));
            objective.add_term(t, 1.0 / k as f64);
        }
    }
    model.set_objective(&objective);
    let meta = SolutionMeta {
        n,
        epsilon: cfg.epsilon,
        rho_excess: cfg.rho_excess,
        k_n: Some(k),
        context_scale: 1.0,
        objective_kind: "scenario_average_cost".into(),
        forecast: ctx.f.clone(),
        ..Default::default()
    };
    finish(net, ctx, cfg, Method::Scena, &model, &x, start, meta, "scena_row")
}

#[allow(clippy::too_many_arguments)]
fn finish(
    net: &NetworkModel,
    ctx: &Context,
    cfg: &MethodConfig,
    method: Method,
    model: &LpModel,
    x: &DispatchVars,
    start: Instant,
    mut meta: SolutionMeta,
    uncertain_rows: &str,
) -> Result<DispatchSolution> {
    let build_secs = start.elapsed().as_secs_f64();
    meta.rows = model.num_rows();
    meta.vars = model.num_vars();
    meta.nonzeros = model.num_nonzeros();
    let sol: LpSolution = solve(model, &cfg.solver)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            let mut violated = diagnose_deterministic(net, &ctx.f)?;
            if violated.is_empty() {
                violated.push(format!("{uncertain_rows} (uncertain constraints cannot be met)"));
            }
            return Err(Error::Infeasible { violated });
        }
        LpStatus::Unbounded => return Err(Error::Unbounded),
        LpStatus::NumericalFailure => {
            return Err(Error::Solver(sol.message.unwrap_or_else(|| "numerical failure".into())));
        }
    }
    meta.iterations = sol.stats.iterations;
    let dispatch = x.extract(&sol);
    let residual = dispatch.residual(net, &ctx.f);
    if residual > 1e-6 {
        return Err(Error::Solver(format!("dispatch violates the deterministic constraints by {residual:e}")));
    }
    Ok(DispatchSolution {
        method,
        dispatch,
        objective: sol.objective,
        status: "optimal".into(),
        build_secs,
        solve_secs: sol.stats.wall_time_secs,
        meta,
    })
}

/// Labels of deterministic rows that cannot be satisfied, found by an
/// elastic re-solve (minimum total slack).
pub fn diagnose_deterministic(net: &NetworkModel, forecast: &[f64]) -> Result<Vec<String>> {
    let mut base = LpModel::new();
    let x = DispatchVars::add_to(&mut base, net.n_gen());
    deterministic_rows(net, forecast, &mut base, &x);
    let mut elastic = LpModel::new();
    for v in 0..base.num_vars() {
        let var = crate::lp::VarId::from_index(v);
        let (lo, hi) = base.bounds(var);
        elastic.add_var(base.var_label(var), lo, hi);
    }
    let mut slacks = Vec::new();
    let mut objective = LinExpr::new();
    for (r, row) in base.rows().enumerate() {
        let mut e = LinExpr::from_terms(row.cols.iter().copied().zip(row.vals.iter().copied()));
        let up = elastic.add_nonneg_var(Label::at("slack_up", r));
        let dn = elastic.add_nonneg_var(Label::at("slack_dn", r));
        e.add_term(up, 1.0).add_term(dn, -1.0);
        objective.add_term(up, 1.0).add_term(dn, 1.0);
        elastic.add_row(row.label, e, row.sense, row.rhs);
        slacks.push((row.label, up, dn));
    }
    elastic.set_objective(&objective);
    let sol = solve(&elastic, &SolverOptions::simplex())?.into_optimal()?;
    Ok(slacks
        .into_iter()
        .filter(|&(_, up, dn)| sol.value(up) + sol.value(dn) > 1e-7)
        .map(|(label, _, _)| label.to_string())
        .collect())
}
