//! Out-of-sample evaluation: real-time re-dispatch per scenario and Monte
//! Carlo aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cvar::{chance_rows_at, max_chance_value};
use crate::error::{Error, Result};
use crate::grid::{cost_epigraph_rows, Dispatch, NetworkModel};
use crate::lp::{solve, Label, LinExpr, LpModel, LpStatus, Sense, SolverOptions};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    /// Load-shedding cost, $/MWh, at every bus.
    pub c_shed: f64,
    /// Shedding or spillage above this many MW counts as a violation.
    pub tol_viol: f64,
    pub solver: SolverOptions,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { c_shed: 500.0, tol_viol: 1e-4, solver: SolverOptions::simplex() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RedispatchOutcome {
    /// Deployed reserve per generator, MW (positive = upward).
    pub r: Vec<f64>,
    /// Load shed per bus, MW.
    pub shed: Vec<f64>,
    /// Wind spilled per farm, MW.
    pub spill: Vec<f64>,
    /// Generation + shedding + reserve-capacity cost, $.
    pub cost: f64,
    pub violated: bool,
    /// Largest chance-row value of the affine policy at this scenario;
    /// positive means the policy itself breaks a limit.
    pub direct_violation: f64,
}

impl RedispatchOutcome {
    pub fn total_shed(&self) -> f64 {
        self.shed.iter().sum()
    }

    pub fn total_spill(&self) -> f64 {
        self.spill.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub expected_cost: f64,
    pub violation_prob: f64,
    /// Fraction of scenarios where the affine policy breaks a chance row.
    pub direct_violation_prob: f64,
    pub n: usize,
    pub outcomes: Vec<RedispatchOutcome>,
}

/// Cheapest corrective action once the wind error `omega` is known.
pub fn redispatch(
    net: &NetworkModel,
    x: &Dispatch,
    forecast: &[f64],
    omega: &[f64],
    opts: &EvalOptions,
) -> Result<RedispatchOutcome> {
    let n_w = net.n_wind();
    for got in [forecast.len(), omega.len()] {
        if got != n_w {
            return Err(Error::DimensionMismatch { expected: n_w, got });
        }
    }
    let available: Vec<f64> = forecast.iter().zip(omega).map(|(f, w)| f + w).collect();
    if let Some(m) = available.iter().position(|a| *a < -1e-9) {
        return Err(Error::InvalidParameter(format!("wind farm {m}: forecast + error is negative ({})", available[m])));
    }

    let mut model = LpModel::new();
    let r: Vec<_> = (0..net.n_gen())
        .map(|j| model.add_var(Label::at("r", j), -x.r_dn[j], x.r_up[j]))
        .collect();
    let shed: Vec<_> = net.buses.iter().enumerate().map(|(b, bus)| model.add_var(Label::at("shed", b), 0.0, bus.load)).collect();
    let spill: Vec<_> = available
        .iter()
        .enumerate()
        .map(|(m, a)| model.add_var(Label::at("spill", m), 0.0, a.max(0.0)))
        .collect();

    let mut objective = LinExpr::new();
    for (j, gen) in net.generators.iter().enumerate() {
        let u = model.add_free_var(Label::at("u", j));
        let out = LinExpr::term(r[j], 1.0) + x.g[j];
        cost_epigraph_rows(&mut model, gen, u, &out, |s| Label::at2("rd_epi", j, s));
        objective.add_term(u, 1.0);
    }
    for &d in &shed {
        objective.add_term(d, opts.c_shed);
    }
    model.set_objective(&objective);

    let mut balance = LinExpr::new();
    r.iter().chain(&shed).for_each(|&v| {
        balance.add_term(v, 1.0);
    });
    spill.iter().for_each(|&v| {
        balance.add_term(v, -1.0);
    });
    model.add_row(Label::new("rd_balance"), balance, Sense::Eq, -omega.iter().sum::<f64>());

    let p = &net.ptdf;
    let base = net.flows(&x.g, &available, &net.loads());
    for (l, line) in net.lines.iter().enumerate() {
        let mut flow = LinExpr::constant(base[l]);
        for (j, &v) in r.iter().enumerate() {
            flow.add_term(v, p.generators[(l, j)]);
        }
        for (m, &v) in spill.iter().enumerate() {
            flow.add_term(v, -p.wind_farms[(l, m)]);
        }
        for (b, &v) in shed.iter().enumerate() {
            flow.add_term(v, p.buses[(l, b)]);
        }
        let flow = flow.compact();
        model.add_row(Label::at("rd_line_max", l), flow.clone(), Sense::Le, line.capacity);
        model.add_row(Label::at("rd_line_min", l), flow, Sense::Ge, -line.capacity);
    }

    let sol = solve(&model, &opts.solver)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Redispatch { scenario: 0, reason: format!("{:?} {}", sol.status, sol.message.unwrap_or_default()) });
    }
    let shed_v: Vec<f64> = shed.iter().map(|&v| sol.value(v).max(0.0)).collect();
    let spill_v: Vec<f64> = spill.iter().map(|&v| sol.value(v).max(0.0)).collect();
    let violated = shed_v.iter().chain(&spill_v).any(|&v| v > opts.tol_viol);
    Ok(RedispatchOutcome {
        r: r.iter().map(|&v| sol.value(v)).collect(),
        cost: sol.objective + x.reserve_cost(net),
        direct_violation: max_chance_value(&chance_rows_at(net, forecast, x), omega),
        shed: shed_v,
        spill: spill_v,
        violated,
    })
}

/// Mean cost and violation frequency over a test set. Scenarios are solved
/// in parallel; results keep the input order.
pub fn evaluate(
    net: &NetworkModel,
    x: &Dispatch,
    forecast: &[f64],
    scenarios: &[Vec<f64>],
    opts: &EvalOptions,
) -> Result<EvaluationReport> {
    if scenarios.is_empty() {
        return Err(Error::EmptySamples);
    }
    let outcomes = scenarios
        .par_iter()
        .enumerate()
        .map(|(s, omega)| {
            redispatch(net, x, forecast, omega, opts).map_err(|e| match e {
                Error::Redispatch { reason, .. } => Error::Redispatch { scenario: s, reason },
                e => e,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = outcomes.len();
    let expected_cost = outcomes.iter().map(|o| o.cost).sum::<f64>() / n as f64;
    let violation_prob = outcomes.iter().filter(|o| o.violated).count() as f64 / n as f64;
    let direct_violation_prob = outcomes.iter().filter(|o| o.direct_violation > opts.tol_viol).count() as f64 / n as f64;
    Ok(EvaluationReport { expected_cost, violation_prob, direct_violation_prob, n, outcomes })
}
