//! Random tiny instances shared by the duality tests and the acceptance run.
#![allow(dead_code)]

use dro_opf::cvar::{emit_cvar_block, ChanceRow, CvarParams};
use dro_opf::grid::{Bus, CostPiece, Dispatch, DispatchVars, Generator, GridFile, Line, NetworkModel, WindFarm};
use dro_opf::lp::{solve, Label, LinExpr, LpModel, SolverOptions};
use dro_opf::uncertainty::{aggregate_distances, joint_distances, min_transport_budget, Context, JointSampleSet};
use dro_opf::worst_case_cost::{emit_worstcase_cost_block, CostParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracles;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tight() -> SolverOptions {
    SolverOptions::default().with_tolerances(1e-10, 1e-11)
}

/// One-farm CVaR instance with constant rows.
#[derive(Clone, Debug)]
pub struct CvarInstance {
    pub ctx: Context,
    pub samples: JointSampleSet,
    pub rows: Vec<(f64, f64)>,
    pub alpha: f64,
    pub rho: f64,
    pub eps: f64,
}

pub fn random_cvar_instance(seed: u64) -> CvarInstance {
    let mut r = rng(seed);
    let cap = 10.0;
    let f: f64 = r.gen_range(2.0..8.0);
    let n = r.gen_range(1..=3usize);
    let z: Vec<Vec<f64>> = (0..n).map(|_| vec![f + r.gen_range(-3.0..3.0)]).collect();
    let w: Vec<Vec<f64>> = (0..n).map(|_| vec![r.gen_range(-f - 3.0..cap - f + 3.0)]).collect();
    let k = r.gen_range(1..=2usize);
    let rows = (0..k).map(|_| (r.gen_range(-2.0..2.0), r.gen_range(-5.0..5.0))).collect();
    let alpha = [0.3, 0.5, 0.75, 1.0][r.gen_range(0..4)];
    let ctx = Context::new(vec![f], vec![cap]).unwrap();
    let samples = JointSampleSet::new(vec![1], &z, &w).unwrap();
    let rho_min = min_transport_budget(&joint_distances(&samples, &ctx, 1.0).unwrap(), alpha).unwrap();
    let rho = rho_min + if r.gen_bool(0.2) { 0.0 } else { r.gen_range(0.0..5.0) };
    CvarInstance { ctx, samples, rows, alpha, rho, eps: r.gen_range(0.05..0.5) }
}

/// Worst-case CVaR from the emitted dual block at the fixed rows.
pub fn cvar_dual(inst: &CvarInstance, rho: f64) -> f64 {
    let mut model = LpModel::new();
    let rows: Vec<ChanceRow> = inst
        .rows
        .iter()
        .enumerate()
        .map(|(k, &(a1, a2))| ChanceRow { tag: Label::at("row", k), a1: vec![LinExpr::constant(a1)], a2: LinExpr::constant(a2) })
        .collect();
    let params = CvarParams { alpha: inst.alpha, rho, epsilon: inst.eps, context_scale: 1.0 };
    let block = emit_cvar_block(&rows, &inst.samples, &inst.ctx, &params, &mut model, false).unwrap();
    model.set_objective(&block.value);
    let sol = solve(&model, &tight()).unwrap();
    assert!(sol.is_optimal(), "{:?} {:?}", sol.status, sol.message);
    sol.objective
}

pub fn cvar_primal(inst: &CvarInstance, rho: f64) -> f64 {
    let f = inst.ctx.f[0];
    let d_z: Vec<f64> = (0..inst.samples.len()).map(|i| (f - inst.samples.z(i)[0]).abs()).collect();
    oracles::cvar_primal(
        &d_z,
        inst.samples.omega_hat(),
        inst.ctx.error_box.lo[0],
        inst.ctx.error_box.hi[0],
        &inst.rows,
        inst.alpha,
        rho,
        inst.eps,
        40,
    )
}

/// Expected-cost instance: random convex costs, fixed dispatch.
#[derive(Clone, Debug)]
pub struct CostInstance {
    pub net: NetworkModel,
    pub ctx: Context,
    pub samples: JointSampleSet,
    pub x: Dispatch,
    pub alpha: f64,
    pub rho: f64,
}

fn random_pieces(r: &mut ChaCha8Rng) -> Vec<CostPiece> {
    // Secants of a convex quadratic, slopes increasing.
    let c2: f64 = r.gen_range(0.01..0.2);
    let c1: f64 = r.gen_range(5.0..40.0);
    let pts = [0.0, 40.0, 80.0, 120.0];
    let n = r.gen_range(1..=3usize);
    (0..n)
        .map(|s| CostPiece { slope: c2 * (pts[s] + pts[s + 1]) + c1, intercept: -c2 * pts[s] * pts[s + 1] })
        .collect()
}

pub fn random_cost_instance(seed: u64) -> CostInstance {
    let mut r = rng(seed);
    let n_g = r.gen_range(1..=2usize);
    let n_w = r.gen_range(1..=2usize);
    let cap = 20.0;
    let gens: Vec<Generator> = (0..n_g)
        .map(|j| Generator {
            id: j as u32 + 1,
            bus: 1,
            g_min: 0.0,
            g_max: 150.0,
            cost_pieces: random_pieces(&mut r),
            c_dn: r.gen_range(0.0..5.0),
            c_up: r.gen_range(0.0..5.0),
        })
        .collect();
    let farms: Vec<WindFarm> = (0..n_w).map(|m| WindFarm { id: m as u32 + 1, bus: 2, capacity: cap }).collect();
    let net = NetworkModel::new(GridFile {
        name: "tiny".into(),
        slack_bus: 1,
        buses: vec![Bus { id: 1, load: 60.0 }, Bus { id: 2, load: 10.0 }],
        lines: vec![Line { id: 1, from: 1, to: 2, reactance: 0.1, capacity: 100.0 }],
        generators: gens,
        wind_farms: farms,
        ptdf: None,
    })
    .unwrap();
    let f: Vec<f64> = (0..n_w).map(|_| r.gen_range(2.0..18.0)).collect();
    let n = r.gen_range(1..=3usize);
    let z: Vec<Vec<f64>> = (0..n).map(|_| f.iter().map(|fm| fm + r.gen_range(-4.0..4.0)).collect()).collect();
    let w: Vec<Vec<f64>> =
        (0..n).map(|_| f.iter().map(|fm| r.gen_range(-fm - 4.0..cap - fm + 4.0)).collect()).collect();
    let ctx = Context::new(f, vec![cap; n_w]).unwrap();
    let samples = JointSampleSet::new((1..=n_w as u32).collect(), &z, &w).unwrap();
    let mut beta: Vec<f64> = (0..n_g).map(|_| r.gen_range(0.1..1.0)).collect();
    let total: f64 = beta.iter().sum();
    beta.iter_mut().for_each(|b| *b /= total);
    let x = Dispatch {
        g: (0..n_g).map(|_| r.gen_range(10.0..80.0)).collect(),
        beta,
        r_dn: (0..n_g).map(|_| r.gen_range(0.0..10.0)).collect(),
        r_up: (0..n_g).map(|_| r.gen_range(0.0..10.0)).collect(),
    };
    let alpha = [0.3, 0.5, 0.75, 1.0][r.gen_range(0..4)];
    let rho_min = min_transport_budget(&aggregate_distances(&samples, &ctx, 1.0).unwrap(), alpha).unwrap();
    let rho = rho_min + if r.gen_bool(0.2) { 0.0 } else { r.gen_range(0.0..6.0) };
    CostInstance { net, ctx, samples, x, alpha, rho }
}

pub fn cost_dual(inst: &CostInstance, rho: f64) -> f64 {
    let mut model = LpModel::new();
    let vars = DispatchVars::add_to(&mut model, inst.net.n_gen());
    vars.fix(&mut model, &inst.x);
    let params = CostParams { alpha: inst.alpha, rho, context_scale: 1.0 };
    let block = emit_worstcase_cost_block(&inst.net, &vars, &inst.samples, &inst.ctx, &params, &mut model).unwrap();
    model.set_objective(&block.value);
    let sol = solve(&model, &tight()).unwrap();
    assert!(sol.is_optimal(), "{:?} {:?}", sol.status, sol.message);
    sol.objective
}

pub fn cost_primal(inst: &CostInstance, rho: f64) -> f64 {
    let d_z: Vec<f64> = (0..inst.samples.len()).map(|i| oracles::l1(&inst.ctx.f, inst.samples.z(i))).collect();
    let x = &inst.x;
    let net = &inst.net;
    let cost = |om: f64| -> f64 {
        net.generators.iter().enumerate().map(|(j, g)| g.cost(x.g[j] - x.beta[j] * om)).sum()
    };
    oracles::expectation_primal(
        &d_z,
        inst.samples.omega_hat(),
        inst.ctx.omega_lo(),
        inst.ctx.omega_hi(),
        cost,
        inst.alpha,
        rho,
        40,
    ) + x.reserve_cost(net)
}

/// Triangle network: two generators, one or two wind farms at the middle bus.
#[derive(Clone, Debug)]
pub struct ThreeBus {
    pub net: NetworkModel,
    pub ctx: Context,
    pub samples: JointSampleSet,
    pub rho_excess: f64,
}

pub fn random_three_bus(seed: u64) -> ThreeBus {
    let mut r = rng(seed ^ 0x3B05);
    let n_w = r.gen_range(1..=2usize);
    let cap = 40.0;
    let gen = |r: &mut ChaCha8Rng, id: u32, bus: u32| Generator {
        id,
        bus,
        g_min: 0.0,
        g_max: 250.0,
        cost_pieces: random_pieces(r),
        c_dn: r.gen_range(0.5..4.0),
        c_up: r.gen_range(0.5..4.0),
    };
    let generators = vec![gen(&mut r, 1, 1), gen(&mut r, 2, 3)];
    let line = |r: &mut ChaCha8Rng, id, from, to| Line { id, from, to, reactance: r.gen_range(0.05..0.2), capacity: r.gen_range(120.0..220.0) };
    let lines = vec![line(&mut r, 1, 1, 2), line(&mut r, 2, 2, 3), line(&mut r, 3, 1, 3)];
    let buses = vec![
        Bus { id: 1, load: r.gen_range(10.0..40.0) },
        Bus { id: 2, load: r.gen_range(30.0..80.0) },
        Bus { id: 3, load: r.gen_range(20.0..60.0) },
    ];
    let net = NetworkModel::new(GridFile {
        name: "triangle".into(),
        slack_bus: 1,
        buses,
        lines,
        generators,
        wind_farms: (0..n_w).map(|m| WindFarm { id: m as u32 + 1, bus: 2, capacity: cap }).collect(),
        ptdf: None,
    })
    .unwrap();
    let f: Vec<f64> = (0..n_w).map(|_| r.gen_range(5.0..35.0)).collect();
    let n = r.gen_range(6..=14usize);
    let mut z = Vec::new();
    let mut w = Vec::new();
    for _ in 0..n {
        let zi: Vec<f64> = f.iter().map(|fm| (fm + r.gen_range(-8.0..8.0)).clamp(1.0, cap - 1.0)).collect();
        let wi: Vec<f64> = zi.iter().map(|zm| r.gen_range(-0.4 * zm..0.4 * (cap - zm))).collect();
        z.push(zi);
        w.push(wi);
    }
    let ctx = Context::new(f, vec![cap; n_w]).unwrap();
    let samples = JointSampleSet::new((1..=n_w as u32).collect(), &z, &w).unwrap();
    ThreeBus { net, ctx, samples, rho_excess: r.gen_range(0.0..3.0) }
}

/// Balanced at zero error, with reserve only on the second unit so that no
/// profitable shift between units exists.
pub fn nominal_dispatch(net: &NetworkModel, f: &[f64]) -> Dispatch {
    let residual = net.total_load() - f.iter().sum::<f64>();
    let n_g = net.n_gen();
    let mut g = vec![residual / n_g as f64; n_g];
    g[0] = residual - g[1..].iter().sum::<f64>();
    let mut r_dn = vec![0.0; n_g];
    let mut r_up = vec![0.0; n_g];
    r_dn[n_g - 1] = 5.0;
    r_up[n_g - 1] = 5.0;
    let mut beta = vec![0.0; n_g];
    beta[n_g - 1] = 1.0;
    Dispatch { g, beta, r_dn, r_up }
}

/// Balanced at zero error, random split and reserves.
pub fn random_dispatch(r: &mut ChaCha8Rng, net: &NetworkModel, f: &[f64]) -> Dispatch {
    let residual = net.total_load() - f.iter().sum::<f64>();
    let share: f64 = r.gen_range(0.1..0.9);
    let g = vec![residual * share, residual * (1.0 - share)];
    let r_dn: Vec<f64> = g.iter().map(|gj| r.gen_range(0.0..gj.min(20.0))).collect();
    let r_up: Vec<f64> = (0..2).map(|_| r.gen_range(0.0..20.0)).collect();
    Dispatch { g, beta: vec![share, 1.0 - share], r_dn, r_up }
}
