//! Worst-case expected dispatch cost over the aggregate-error ambiguity set.

use crate::error::{Error, Result};
use crate::grid::{cost_epigraph_rows, DispatchVars, NetworkModel};
use crate::lp::{Label, LinExpr, LpModel, Sense, VarId};
use crate::uncertainty::{aggregate_distances, context_distances, min_transport_budget, trimmed_mass, Context, JointSampleSet};

/// Samples split by the position of `Ω̂_i` relative to `[Ω_lo, Ω_hi]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OmegaPartition {
    pub under: Vec<usize>,
    pub inside: Vec<usize>,
    pub over: Vec<usize>,
}

pub fn omega_partition(samples: &JointSampleSet, ctx: &Context) -> OmegaPartition {
    let (lo, hi) = (ctx.omega_lo(), ctx.omega_hi());
    let mut p = OmegaPartition::default();
    for (i, &o) in samples.omega_hat().iter().enumerate() {
        if o < lo {
            p.under.push(i);
        } else if o > hi {
            p.over.push(i);
        } else {
            p.inside.push(i);
        }
    }
    p
}

#[derive(Clone, Copy, Debug)]
pub struct CostParams {
    pub alpha: f64,
    /// Transport budget ρ in (z, Ω)-space.
    pub rho: f64,
    pub context_scale: f64,
}

#[derive(Clone, Debug)]
pub struct CostBlock {
    pub lambda: VarId,
    pub theta: VarId,
    pub mu: Vec<VarId>,
    pub t: Vec<VarId>,
    /// `λρ + θ + (1/(Nα))Σμ̄_i + ⟨c^D, r^D⟩ + ⟨c^U, r^U⟩`
    pub value: LinExpr,
    pub rho_min: f64,
    pub partition: OmegaPartition,
}

/// Emits the LP whose minimum over the block variables is the worst-case
/// expected cost at the decision `x`. The caller adds `value` to the
/// objective.
///
/// The endpoint epigraphs `t̲_j`, `t̄_j` do not depend on the sample and are
/// shared by all samples.
pub fn emit_worstcase_cost_block(
    net: &NetworkModel,
    x: &DispatchVars,
    samples: &JointSampleSet,
    ctx: &Context,
    params: &CostParams,
    model: &mut LpModel,
) -> Result<CostBlock> {
    let CostParams { alpha, rho, context_scale } = *params;
    if !(context_scale >= 0.0) {
        return Err(Error::InvalidParameter("context_scale must be non-negative".into()));
    }
    let dist = aggregate_distances(samples, ctx, context_scale)?;
    let rho_min = min_transport_budget(&dist, alpha)?;
    if !(rho >= rho_min - 1e-9 * (1.0 + rho_min)) {
        return Err(Error::BudgetBelowMinimum { rho, rho_min });
    }
    let dz = context_distances(samples, ctx, context_scale)?;
    let na = trimmed_mass(samples.len(), alpha)?;
    let (lo, hi) = (ctx.omega_lo(), ctx.omega_hi());
    let omega = samples.omega_hat();
    let partition = omega_partition(samples, ctx);
    let n = samples.len();

    let lambda = model.add_nonneg_var(Label::new("cost_lambda"));
    let theta = model.add_free_var(Label::new("cost_theta"));
    let mu: Vec<VarId> = (0..n).map(|i| model.add_nonneg_var(Label::at("cost_mu", i))).collect();
    let t: Vec<VarId> = (0..n).map(|i| model.add_free_var(Label::at("cost_t", i))).collect();

    let endpoint = |model: &mut LpModel, kind: &'static str, row: &'static str, at: f64| -> Vec<VarId> {
        net.generators
            .iter()
            .enumerate()
            .map(|(j, gen)| {
                let tj = model.add_free_var(Label::at(kind, j));
                cost_epigraph_rows(model, gen, tj, &x.output_at(j, at), |s| Label::at2(row, j, s));
                tj
            })
            .collect()
    };
    let t_lo = endpoint(model, "cost_t_lo", "cost_epi_lo", lo);
    let t_hi = endpoint(model, "cost_t_hi", "cost_epi_hi", hi);

    for i in 0..n {
        model.add_row(
            Label::at("cost_sample", i),
            LinExpr::var(mu[i]).with(theta, 1.0).with(lambda, dz[i]).with(t[i], -1.0),
            Sense::Ge,
            0.0,
        );
        // t_i ≥ Σ_j t_ij(endpoint) − λ·|endpoint − Ω̂_i|; the sign of
        // (endpoint − Ω̂_i) is fixed by the partition the sample falls in.
        for (kind, ends, at) in [("cost_lo", &t_lo, lo), ("cost_hi", &t_hi, hi)] {
            let mut e = LinExpr::var(t[i]).with(lambda, (at - omega[i]).abs());
            for &tj in ends.iter() {
                e.add_term(tj, -1.0);
            }
            model.add_row(Label::at(kind, i), e, Sense::Ge, 0.0);
        }
    }
    for &i in &partition.inside {
        let mut e = LinExpr::var(t[i]);
        for (j, gen) in net.generators.iter().enumerate() {
            let tij = model.add_free_var(Label::at2("cost_t_hat", i, j));
            cost_epigraph_rows(model, gen, tij, &x.output_at(j, omega[i]), |s| Label::at3("cost_epi_hat", i, j, s));
            e.add_term(tij, -1.0);
        }
        model.add_row(Label::at("cost_hat", i), e, Sense::Ge, 0.0);
    }

    let mut value = LinExpr::term(lambda, rho).with(theta, 1.0);
    for &m in &mu {
        value.add_term(m, 1.0 / na);
    }
    value += &x.reserve_cost(net);
    Ok(CostBlock { lambda, theta, mu, t, value, rho_min, partition })
}
