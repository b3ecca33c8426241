//! Independent reference computations for the reformulations. Everything here
//! is assembled directly against microlp from first principles (primal
//! transport problems, angle-based power flow), never through the crate's
//! model builders.
#![allow(dead_code)]

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome, Variable};

pub struct Lp {
    pub p: Problem,
}

impl Lp {
    pub fn max() -> Self {
        Lp { p: Problem::new(OptimizationDirection::Maximize) }
    }

    pub fn min() -> Self {
        Lp { p: Problem::new(OptimizationDirection::Minimize) }
    }

    pub fn var(&mut self, obj: f64, lo: f64, hi: f64) -> Variable {
        self.p.add_var(obj, (lo, hi))
    }

    pub fn le(&mut self, terms: &[(Variable, f64)], rhs: f64) {
        self.p.add_constraint(merged(terms), ComparisonOp::Le, rhs);
    }

    pub fn ge(&mut self, terms: &[(Variable, f64)], rhs: f64) {
        self.p.add_constraint(merged(terms), ComparisonOp::Ge, rhs);
    }

    pub fn eq(&mut self, terms: &[(Variable, f64)], rhs: f64) {
        self.p.add_constraint(merged(terms), ComparisonOp::Eq, rhs);
    }

    pub fn solve(self) -> f64 {
        match self.p.solve() {
            Ok(SolveOutcome::Solution(s)) => s.objective(),
            other => panic!("oracle LP failed: {:?}", other.err()),
        }
    }
}

/// microlp wants each variable at most once per row.
fn merged(terms: &[(Variable, f64)]) -> Vec<(Variable, f64)> {
    let mut out: Vec<(Variable, f64)> = Vec::new();
    for &(v, c) in terms {
        match out.iter_mut().find(|(w, _)| *w == v) {
            Some(t) => t.1 += c,
            None => out.push((v, c)),
        }
    }
    out
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn clip(p: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    p.iter().zip(lo.iter().zip(hi)).map(|(x, (l, h))| x.clamp(*l, *h)).collect()
}

fn box_vertices(lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    (0..1usize << lo.len())
        .map(|mask| (0..lo.len()).map(|m| if mask >> m & 1 == 1 { hi[m] } else { lo[m] }).collect())
        .collect()
}

/// Partial optimal transport: move a (1−α)-trimming of the empirical measure
/// on `points` into the box at least ℓ1 cost. Candidate destinations are the
/// box vertices plus every point's projection.
pub fn partial_transport_lp(points: &[Vec<f64>], lo: &[f64], hi: &[f64], alpha: f64) -> f64 {
    let n = points.len();
    let cap = 1.0 / (n as f64 * alpha);
    let mut dest = box_vertices(lo, hi);
    dest.extend(points.iter().map(|p| clip(p, lo, hi)));
    let mut lp = Lp::min();
    let mut all = Vec::new();
    for p in points {
        let row: Vec<(Variable, f64)> = dest.iter().map(|c| (lp.var(l1(p, c), 0.0, f64::INFINITY), 1.0)).collect();
        lp.le(&row, cap);
        all.extend(row);
    }
    lp.eq(&all, 1.0);
    lp.solve()
}

/// Minimum of `Σ b_i d_i` over the vertices of the trimming polytope: every
/// coordinate at 0 or the cap except at most one.
pub fn trimming_vertex_min(d: &[f64], alpha: f64) -> f64 {
    let n = d.len();
    let cap = 1.0 / (n as f64 * alpha);
    let mut best = f64::INFINITY;
    for mask in 0..1usize << n {
        let full = mask.count_ones() as f64 * cap;
        if full > 1.0 + 1e-12 {
            continue;
        }
        let rest = 1.0 - full;
        let base: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| cap * d[i]).sum();
        if rest <= 1e-12 {
            best = best.min(base);
            continue;
        }
        for j in (0..n).filter(|j| mask >> j & 1 == 0) {
            if rest <= cap + 1e-12 {
                best = best.min(base + rest * d[j]);
            }
        }
    }
    best
}

/// One-dimensional candidate support: interval endpoints, clipped atoms and
/// a uniform grid.
fn candidates(atoms: &[f64], lo: f64, hi: f64, grid: usize) -> Vec<f64> {
    let mut c = vec![lo, hi];
    c.extend(atoms.iter().map(|a| a.clamp(lo, hi)));
    c.extend((1..grid).map(|k| lo + (hi - lo) * k as f64 / grid as f64));
    c
}

/// Worst-case CVaR_ε of `max_k (a1k·ω + a2k)` over distributions on
/// `{z*} × [lo, hi]` within transport budget ρ of a (1−α)-trimming of the
/// samples `(d_z,i, ω̂_i)`, where `d_z,i` is the forecast-block distance.
///
/// Variables: trimming weights implicit in the plan `p_ic` (atom i moved to
/// candidate c) and the tail mass `r_ic ≤ p_ic` with `Σ r = ε`.
pub fn cvar_primal(
    d_z: &[f64],
    omega_hat: &[f64],
    lo: f64,
    hi: f64,
    rows: &[(f64, f64)],
    alpha: f64,
    rho: f64,
    eps: f64,
    grid: usize,
) -> f64 {
    let n = omega_hat.len();
    let cap = 1.0 / (n as f64 * alpha);
    let cand = candidates(omega_hat, lo, hi, grid);
    let phi = |w: f64| rows.iter().map(|(a1, a2)| a1 * w + a2).fold(f64::NEG_INFINITY, f64::max);
    let mut lp = Lp::max();
    let (mut mass, mut budget, mut tail) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        let mut atom = Vec::new();
        for &c in &cand {
            let p = lp.var(0.0, 0.0, f64::INFINITY);
            let r = lp.var(phi(c) / eps, 0.0, f64::INFINITY);
            lp.le(&[(r, 1.0), (p, -1.0)], 0.0);
            atom.push((p, 1.0));
            budget.push((p, d_z[i] + (c - omega_hat[i]).abs()));
            tail.push((r, 1.0));
        }
        lp.le(&atom, cap);
        mass.extend(atom);
    }
    lp.eq(&mass, 1.0);
    lp.le(&budget, rho);
    lp.eq(&tail, eps);
    lp.solve()
}

/// Worst-case expectation of a convex function of Ω over the same kind of
/// set on `{z*} × [lo, hi]`.
pub fn expectation_primal(
    d_z: &[f64],
    omega_hat: &[f64],
    lo: f64,
    hi: f64,
    cost: impl Fn(f64) -> f64,
    alpha: f64,
    rho: f64,
    grid: usize,
) -> f64 {
    let n = omega_hat.len();
    let cap = 1.0 / (n as f64 * alpha);
    let cand = candidates(omega_hat, lo, hi, grid);
    let mut lp = Lp::max();
    let (mut mass, mut budget) = (Vec::new(), Vec::new());
    for i in 0..n {
        let mut atom = Vec::new();
        for &c in &cand {
            let p = lp.var(cost(c), 0.0, f64::INFINITY);
            atom.push((p, 1.0));
            budget.push((p, d_z[i] + (c - omega_hat[i]).abs()));
        }
        lp.le(&atom, cap);
        mass.extend(atom);
    }
    lp.eq(&mass, 1.0);
    lp.le(&budget, rho);
    lp.solve()
}

/// Bus-angle data for the angle-based re-dispatch oracle.
pub struct AngleCase {
    /// Per bus: load (MW).
    pub loads: Vec<f64>,
    /// (from index, to index, reactance, capacity)
    pub lines: Vec<(usize, usize, f64, f64)>,
    pub slack: usize,
    /// (bus index, g, r_dn, r_up, cost pieces (slope, intercept), c_dn, c_up)
    pub gens: Vec<(usize, f64, f64, f64, Vec<(f64, f64)>, f64, f64)>,
    /// (bus index, forecast f, realized error ω)
    pub farms: Vec<(usize, f64, f64)>,
    pub c_shed: f64,
}

/// Real-time re-dispatch with nodal balances and explicit voltage angles:
/// min Σ_j C_j(g_j + r_j) + c_shed·ΣΔd + reserve cost.
/// Returns (cost, total shed, total spill).
pub fn redispatch_by_angles(case: &AngleCase) -> (f64, f64, f64) {
    let nb = case.loads.len();
    let mut lp = Lp::min();
    let theta: Vec<Variable> = (0..nb)
        .map(|b| if b == case.slack { lp.var(0.0, 0.0, 0.0) } else { lp.var(0.0, f64::NEG_INFINITY, f64::INFINITY) })
        .collect();
    let shed: Vec<Variable> = case.loads.iter().map(|&l| lp.var(case.c_shed, 0.0, l)).collect();
    let spill: Vec<Variable> = case.farms.iter().map(|&(_, f, w)| lp.var(0.0, 0.0, (f + w).max(0.0))).collect();
    let mut reserve_cost = 0.0;
    let mut inject: Vec<Vec<(Variable, f64)>> = vec![Vec::new(); nb];
    let mut fixed = vec![0.0; nb];
    for (b, l) in case.loads.iter().enumerate() {
        fixed[b] -= l;
        inject[b].push((shed[b], 1.0));
    }
    for (gi, (bus, g, rd, ru, pieces, cd, cu)) in case.gens.iter().enumerate() {
        let _ = gi;
        let r = lp.var(0.0, -rd, *ru);
        let u = lp.var(1.0, f64::NEG_INFINITY, f64::INFINITY);
        for (m, n) in pieces {
            // u ≥ m (g + r) + n
            lp.ge(&[(u, 1.0), (r, -m)], m * g + n);
        }
        reserve_cost += cd * rd + cu * ru;
        fixed[*bus] += g;
        inject[*bus].push((r, 1.0));
    }
    for (k, &(bus, f, w)) in case.farms.iter().enumerate() {
        fixed[bus] += f + w;
        inject[bus].push((spill[k], -1.0));
    }
    // Net injection at each bus equals the angle-driven outflow.
    let mut outflow: Vec<Vec<(Variable, f64)>> = vec![Vec::new(); nb];
    for &(a, b, x, cap) in &case.lines {
        let y = 1.0 / x;
        outflow[a].push((theta[a], y));
        outflow[a].push((theta[b], -y));
        outflow[b].push((theta[b], y));
        outflow[b].push((theta[a], -y));
        lp.le(&[(theta[a], y), (theta[b], -y)], cap);
        lp.ge(&[(theta[a], y), (theta[b], -y)], -cap);
    }
    for b in 0..nb {
        let mut row = inject[b].clone();
        row.extend(outflow[b].iter().map(|&(v, c)| (v, -c)));
        lp.eq(&row, -fixed[b]);
    }
    let p = lp.p;
    match p.solve() {
        Ok(SolveOutcome::Solution(s)) => {
            let total_shed = shed.iter().map(|&v| s.var_value(v)).sum();
            let total_spill = spill.iter().map(|&v| s.var_value(v)).sum();
            (s.objective() + reserve_cost, total_shed, total_spill)
        }
        other => panic!("angle oracle failed: {:?}", other.err()),
    }
}
