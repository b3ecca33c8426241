//! Joint chance constraints: extraction of the affine-in-ω rows and the LP
//! block enforcing their distributionally robust CVaR approximation.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Dispatch, DispatchVars, NetworkModel};
use crate::lp::{Label, LinExpr, LpModel, Sense, VarId};
use crate::uncertainty::{context_distances, joint_distances, min_transport_budget, Context, JointSampleSet};

/// One uncertain constraint `⟨a1(x), ω⟩ + a2(x) ≤ 0`.
#[derive(Clone, Debug)]
pub struct ChanceRow {
    pub tag: Label,
    /// One expression per wind farm.
    pub a1: Vec<LinExpr>,
    pub a2: LinExpr,
}

/// A [`ChanceRow`] evaluated at a fixed decision.
#[derive(Clone, Debug, PartialEq)]
pub struct NumericChanceRow {
    pub tag: Label,
    pub a1: Vec<f64>,
    pub a2: f64,
}

impl NumericChanceRow {
    pub fn value(&self, omega: &[f64]) -> f64 {
        self.a1.iter().zip(omega).map(|(a, w)| a * w).sum::<f64>() + self.a2
    }
}

/// Reserve limits (upward and downward per generator) and line limits
/// (upper and lower per line) under the affine policy `g − β·Ω`.
/// `K = 2|G| + 2|L|`.
pub fn extract_chance_rows(net: &NetworkModel, forecast: &[f64], x: &DispatchVars) -> Vec<ChanceRow> {
    let n_w = net.n_wind();
    let mut rows = Vec::with_capacity(2 * net.n_gen() + 2 * net.n_lines());
    for j in 0..net.n_gen() {
        rows.push(ChanceRow {
            tag: Label::at("cc_up", j),
            a1: vec![LinExpr::term(x.beta[j], -1.0); n_w],
            a2: LinExpr::term(x.r_up[j], -1.0),
        });
        rows.push(ChanceRow {
            tag: Label::at("cc_dn", j),
            a1: vec![LinExpr::term(x.beta[j], 1.0); n_w],
            a2: LinExpr::term(x.r_dn[j], -1.0),
        });
    }
    let p = &net.ptdf;
    let load_flows = net.load_flows();
    for (l, line) in net.lines.iter().enumerate() {
        let beta_share = LinExpr::from_terms(x.beta.iter().enumerate().map(|(j, &b)| (b, p.generators[(l, j)])));
        let mut flow = LinExpr::from_terms(x.g.iter().enumerate().map(|(j, &g)| (g, p.generators[(l, j)])));
        let wind: f64 = forecast.iter().enumerate().map(|(m, f)| p.wind_farms[(l, m)] * f).sum();
        flow.add_constant(wind + load_flows[l]);
        let a1: Vec<LinExpr> = (0..n_w).map(|m| -beta_share.clone() + p.wind_farms[(l, m)]).collect();
        rows.push(ChanceRow {
            tag: Label::at("cc_line_max", l),
            a1: a1.clone(),
            a2: flow.clone() + -line.capacity,
        });
        rows.push(ChanceRow {
            tag: Label::at("cc_line_min", l),
            a1: a1.into_iter().map(|e| -e).collect(),
            a2: -flow + -line.capacity,
        });
    }
    rows
}

/// Chance rows with the decision substituted.
pub fn chance_rows_at(net: &NetworkModel, forecast: &[f64], x: &Dispatch) -> Vec<NumericChanceRow> {
    let mut scratch = LpModel::new();
    let vars = DispatchVars::add_to(&mut scratch, net.n_gen());
    let mut values = vec![0.0; scratch.num_vars()];
    for (ids, vals) in [(&vars.g, &x.g), (&vars.beta, &x.beta), (&vars.r_dn, &x.r_dn), (&vars.r_up, &x.r_up)] {
        for (v, val) in ids.iter().zip(vals) {
            values[v.index()] = *val;
        }
    }
    extract_chance_rows(net, forecast, &vars)
        .into_iter()
        .map(|r| NumericChanceRow {
            tag: r.tag,
            a1: r.a1.iter().map(|e| e.eval(&values)).collect(),
            a2: r.a2.eval(&values),
        })
        .collect()
}

/// `max_k ⟨a1k, ω⟩ + a2k`; positive means some constraint is violated.
pub fn max_chance_value(rows: &[NumericChanceRow], omega: &[f64]) -> f64 {
    rows.iter().map(|r| r.value(omega)).fold(f64::NEG_INFINITY, f64::max)
}

/// Replaces long linear parts by cached auxiliary variables so that an
/// expression repeated across many rows costs one column per use.
pub(crate) struct ExprCache {
    var_kind: &'static str,
    row_kind: &'static str,
    cache: HashMap<Vec<(VarId, u64)>, VarId>,
}

impl ExprCache {
    pub(crate) fn new(var_kind: &'static str, row_kind: &'static str) -> Self {
        ExprCache { var_kind, row_kind, cache: HashMap::new() }
    }

    pub(crate) fn shorten(&mut self, model: &mut LpModel, expr: &LinExpr) -> LinExpr {
        let e = expr.clone().compact();
        if e.terms().len() <= 2 {
            return e;
        }
        let key = |sign: f64| -> Vec<(VarId, u64)> { e.terms().iter().map(|&(v, c)| (v, (sign * c).to_bits())).collect() };
        let k = e.constant_part();
        if let Some(&y) = self.cache.get(&key(1.0)) {
            return LinExpr::var(y) + k;
        }
        if let Some(&y) = self.cache.get(&key(-1.0)) {
            return LinExpr::term(y, -1.0) + k;
        }
        let n = self.cache.len();
        let short = model.materialize(Label::at(self.var_kind, n), Label::at(self.row_kind, n), &e);
        let y = short.terms()[0].0;
        self.cache.insert(key(1.0), y);
        short
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CvarParams {
    /// Trimming level α ∈ (0, 1].
    pub alpha: f64,
    /// Transport budget ρ in (z, ω)-space.
    pub rho: f64,
    /// Violation tolerance ε ∈ (0, 1).
    pub epsilon: f64,
    /// Weight of the forecast block in the ground metric.
    pub context_scale: f64,
}

/// Handles to the variables of an emitted CVaR block.
#[derive(Clone, Debug)]
pub struct CvarBlock {
    pub tau: VarId,
    pub lambda: VarId,
    pub theta: VarId,
    pub mu: Vec<VarId>,
    /// `τ + (1/ε)[λ2ρ + θ2 + (1/(Nα))Σμ_i]`; the worst-case CVaR when minimized.
    pub value: LinExpr,
    pub rho_min: f64,
    /// Number of (i, k) pairs: N·(K+1).
    pub n_pairs: usize,
    n_w: usize,
    n_k: usize,
    pair_start: usize,
}

impl CvarBlock {
    fn pair_var(&self, i: usize, k: usize, which: usize, m: usize) -> VarId {
        VarId::from_index(self.pair_start + ((i * self.n_k + k) * 4 + which) * self.n_w + m)
    }

    pub fn gamma_pos(&self, i: usize, k: usize, m: usize) -> VarId {
        self.pair_var(i, k, 0, m)
    }

    pub fn gamma_neg(&self, i: usize, k: usize, m: usize) -> VarId {
        self.pair_var(i, k, 1, m)
    }

    pub fn v_pos(&self, i: usize, k: usize, m: usize) -> VarId {
        self.pair_var(i, k, 2, m)
    }

    pub fn v_neg(&self, i: usize, k: usize, m: usize) -> VarId {
        self.pair_var(i, k, 3, m)
    }

    /// Rows predicted for the block: N(K+1)(2|W|+1) + N + 1.
    pub fn expected_rows(n: usize, k: usize, n_w: usize) -> usize {
        n * (k + 1) * (2 * n_w + 1) + n + 1
    }

    /// Row kinds emitted by the block.
    pub const ROW_KINDS: [&'static str; 5] = ["cvar_master", "cvar_sample", "cvar_link", "cvar_linf", "cvar_mu_nonneg"];

    pub fn count_rows(model: &LpModel) -> usize {
        Self::ROW_KINDS.iter().map(|k| model.count_rows(k)).sum()
    }
}

/// Emits the dual block of the worst-case CVaR of `max_k ⟨a1k, ω⟩ + a2k`
/// over the trimmings-based ambiguity set. With `enforce` the master row
/// `value ≤ 0` is added; without it the block only defines `value`.
///
/// Per sample i and row k ≤ K+1 (the extra row has a1 = 0, a'2 = 0):
///   μ_i + θ2 + λ2·d_i ≥ a'2k + Σ_m (hi_m v⁺ − lo_m v⁻) − ⟨γ⁺ − γ⁻, ω̂_i⟩
///   γ⁺ − γ⁻ − v⁺ + v⁻ = −a1k
///   γ⁺ + γ⁻ ≤ λ2
/// where the split v = v⁺ − v⁻ linearizes the box support function and
/// γ = γ⁺ − γ⁻ the ℓ∞ bound.
pub fn emit_cvar_block(
    rows: &[ChanceRow],
    samples: &JointSampleSet,
    ctx: &Context,
    params: &CvarParams,
    model: &mut LpModel,
    enforce: bool,
) -> Result<CvarBlock> {
    let CvarParams { alpha, rho, epsilon, context_scale } = *params;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !ctx.error_box.is_bounded() {
        return Err(Error::InvalidParameter("conditional error box must be bounded".into()));
    }
    if !(context_scale >= 0.0) {
        return Err(Error::InvalidParameter("context_scale must be non-negative".into()));
    }
    let dist = joint_distances(samples, ctx, context_scale)?;
    let rho_min = min_transport_budget(&dist, alpha)?;
    let dz = context_distances(samples, ctx, context_scale)?;
    if !(rho >= rho_min - 1e-9 * (1.0 + rho_min)) {
        return Err(Error::BudgetBelowMinimum { rho, rho_min });
    }
    let n_w = ctx.f.len();
    if rows.iter().any(|r| r.a1.len() != n_w) {
        return Err(Error::DimensionMismatch { expected: n_w, got: rows[0].a1.len() });
    }
    let x_vars = model.num_vars();
    if rows
        .iter()
        .flat_map(|r| r.a1.iter().chain(std::iter::once(&r.a2)))
        .any(|e| e.terms().iter().any(|(v, _)| v.index() >= x_vars))
    {
        return Err(Error::InvalidModel("chance rows may only reference decision variables".into()));
    }

    // Short forms of the row data, shared across samples.
    let mut cache = ExprCache::new("cc_aux", "cc_aux_def");
    let a1: Vec<Vec<LinExpr>> =
        rows.iter().map(|r| r.a1.iter().map(|e| cache.shorten(model, e)).collect()).collect();
    let a2: Vec<LinExpr> = rows.iter().map(|r| cache.shorten(model, &r.a2)).collect();

    let n = samples.len();
    let n_k = rows.len() + 1;
    let na = crate::uncertainty::trimmed_mass(n, alpha)?;
    let tau = model.add_free_var(Label::new("cvar_tau"));
    let lambda = model.add_nonneg_var(Label::new("cvar_lambda"));
    let theta = model.add_free_var(Label::new("cvar_theta"));
    let mu: Vec<VarId> = (0..n).map(|i| model.add_free_var(Label::at("cvar_mu", i))).collect();
    let pair_start = model.num_vars();
    const KINDS: [&str; 4] = ["cvar_gamma_pos", "cvar_gamma_neg", "cvar_v_pos", "cvar_v_neg"];
    for i in 0..n {
        for k in 0..n_k {
            for kind in KINDS {
                for m in 0..n_w {
                    model.add_nonneg_var(Label::at3(kind, i, k, m));
                }
            }
        }
    }
    let block = CvarBlock {
        tau,
        lambda,
        theta,
        mu: mu.clone(),
        value: LinExpr::var(tau)
            .with(lambda, rho / epsilon)
            .with(theta, 1.0 / epsilon)
            + LinExpr::from_terms(mu.iter().map(|&m| (m, 1.0 / (epsilon * na)))),
        rho_min,
        n_pairs: n * n_k,
        n_w,
        n_k,
        pair_start,
    };

    if enforce {
        model.add_row(Label::new("cvar_master"), block.value.clone(), Sense::Le, 0.0);
    }

    let lo = &ctx.error_box.lo;
    let hi = &ctx.error_box.hi;
    type Row = (Label, LinExpr, Sense);
    let per_sample: Vec<Vec<Row>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let w = samples.w(i);
            let mut out = Vec::with_capacity(n_k * (2 * n_w + 1) + 1);
            for k in 0..n_k {
                let mut s = LinExpr::var(mu[i]).with(theta, 1.0).with(lambda, dz[i]);
                if k < rows.len() {
                    s.add_scaled(&a2[k], -1.0);
                    s.add_term(tau, 1.0);
                }
                for m in 0..n_w {
                    s.add_term(block.v_pos(i, k, m), -hi[m]);
                    s.add_term(block.v_neg(i, k, m), lo[m]);
                    s.add_term(block.gamma_pos(i, k, m), w[m]);
                    s.add_term(block.gamma_neg(i, k, m), -w[m]);
                }
                out.push((Label::at2("cvar_sample", i, k), s, Sense::Ge));
                for m in 0..n_w {
                    let mut link = LinExpr::var(block.gamma_pos(i, k, m))
                        .with(block.gamma_neg(i, k, m), -1.0)
                        .with(block.v_pos(i, k, m), -1.0)
                        .with(block.v_neg(i, k, m), 1.0);
                    if let Some(a) = a1.get(k) {
                        link += &a[m];
                    }
                    out.push((Label::at3("cvar_link", i, k, m), link, Sense::Eq));
                }
                for m in 0..n_w {
                    let linf = LinExpr::var(block.gamma_pos(i, k, m))
                        .with(block.gamma_neg(i, k, m), 1.0)
                        .with(lambda, -1.0);
                    out.push((Label::at3("cvar_linf", i, k, m), linf, Sense::Le));
                }
            }
            out
        })
        .collect();
    for rows_i in per_sample {
        for (label, expr, sense) in rows_i {
            model.add_row(label, expr, sense, 0.0);
        }
    }
    for (i, &m) in mu.iter().enumerate() {
        model.add_row(Label::at("cvar_mu_nonneg", i), LinExpr::var(m), Sense::Ge, 0.0);
    }
    Ok(block)
}
