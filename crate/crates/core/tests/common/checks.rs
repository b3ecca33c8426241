//! Self-contained checks shared by the integration tests and the acceptance
//! run. Each returns a one-line summary on success.
#![allow(dead_code)]

use dro_opf::cvar::{emit_cvar_block, ChanceRow, CvarBlock, CvarParams};
use dro_opf::datagen::{fit_beta, generate_test_set, sigma_of_forecast};
use dro_opf::evaluate::{redispatch, EvalOptions};
use dro_opf::grid::{Dispatch, NetworkModel};
use dro_opf::lp::{Label, LinExpr, LpModel};
use dro_opf::methods::{solve_method, Method, MethodConfig};
use dro_opf::uncertainty::{is_trimming, min_transport_budget, BoxSet, Context, JointSampleSet};
use rand::Rng;

use super::instances::*;
use super::oracles::{self, AngleCase};

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

pub fn trimming_example() -> Check {
    let third = 1.0 / 3.0;
    let cases: [(&str, [f64; 3], bool); 5] = [
        ("empirical", [third, third, third], true),
        ("Q", [2.0 / 3.0, third, 0.0], true),
        ("P", [1.0, 0.0, 0.0], false),
        ("S", [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], true),
        ("V", [0.75, 1.0 / 12.0, 2.0 / 12.0], false),
    ];
    for (name, b, want) in cases {
        let got = is_trimming(&b, 0.5).map_err(|e| e.to_string())?;
        ensure!(got == want, "{name}: got {got}, expected {want}");
    }
    Ok("5/5 membership verdicts".into())
}

pub fn min_budget_matches_transport() -> Check {
    let mut r = rng(2024);
    let mut worst = 0.0_f64;
    for case in 0..200 {
        let dim = 1 + case % 2;
        let n = r.gen_range(1..=8usize);
        let alpha = [0.3, 0.5, 1.0][r.gen_range(0..3)];
        let lo: Vec<f64> = (0..dim).map(|_| r.gen_range(-3.0..1.0)).collect();
        let mut hi: Vec<f64> = lo.iter().map(|l| l + r.gen_range(0.0..4.0)).collect();
        if dim == 2 && r.gen_bool(0.5) {
            // Context coordinate: the target is a single forecast value.
            hi[0] = lo[0];
        }
        let points: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| r.gen_range(-8.0..8.0)).collect()).collect();
        let bx = BoxSet::new(lo.clone(), hi.clone()).map_err(|e| e.to_string())?;
        let d: Vec<f64> = points.iter().map(|p| bx.dist_l1(p)).collect();
        let closed = min_transport_budget(&d, alpha).map_err(|e| e.to_string())?;
        let lp = oracles::partial_transport_lp(&points, &lo, &hi, alpha);
        let vertex = oracles::trimming_vertex_min(&d, alpha);
        let gap = (closed - lp).abs().max((closed - vertex).abs());
        worst = worst.max(gap);
        ensure!(gap <= 1e-9, "case {case}: closed form {closed}, transport LP {lp}, vertex {vertex}");
    }
    Ok(format!("200 instances, max gap {worst:.1e}"))
}

pub fn cvar_duality() -> Check {
    let mut worst = 0.0_f64;
    for seed in 0..50 {
        let inst = random_cvar_instance(seed);
        let (d, p) = (cvar_dual(&inst, inst.rho), cvar_primal(&inst, inst.rho));
        worst = worst.max((d - p).abs());
        ensure!((d - p).abs() <= 1e-5, "seed {seed}: dual {d}, primal {p}");
    }
    Ok(format!("50 instances, max gap {worst:.1e}"))
}

pub fn cost_duality() -> Check {
    let mut worst = 0.0_f64;
    for seed in 0..50 {
        let inst = random_cost_instance(seed);
        let (d, p) = (cost_dual(&inst, inst.rho), cost_primal(&inst, inst.rho));
        worst = worst.max((d - p).abs());
        ensure!((d - p).abs() <= 1e-6, "seed {seed}: dual {d}, primal {p}");
    }
    Ok(format!("50 instances, max gap {worst:.1e}"))
}

pub fn drow_collapse() -> Check {
    let mut worst = 0.0_f64;
    for seed in 0..20 {
        let inst = random_three_bus(seed);
        let rho_excess = inst.rho_excess;
        let trimm = MethodConfig {
            alpha: Some(1.0),
            context_scale: 0.0,
            rho_excess,
            solver: tight(),
            ..MethodConfig::new(Method::Drotrimm)
        };
        let drow = MethodConfig { rho_excess, solver: tight(), ..MethodConfig::new(Method::Drow) };
        let a = solve_method(&inst.net, &inst.samples, &inst.ctx, &trimm).map_err(|e| format!("seed {seed}: {e}"))?;
        let b = solve_method(&inst.net, &inst.samples, &inst.ctx, &drow).map_err(|e| format!("seed {seed}: {e}"))?;
        let gap = (a.objective - b.objective).abs();
        worst = worst.max(gap);
        ensure!(gap <= 1e-8, "seed {seed}: DROTRIMM {} vs DROW {}", a.objective, b.objective);
    }
    Ok(format!("20 instances, max gap {worst:.1e}"))
}

pub fn monotone_in_budget() -> Check {
    let sweep = [0.0, 0.5, 1.0, 5.0, 20.0];
    for seed in 0..20 {
        let inst = random_cvar_instance(100 + seed);
        let v: Vec<f64> = sweep.iter().map(|e| cvar_dual(&inst, inst.rho + e)).collect();
        ensure!(v.windows(2).all(|w| w[1] >= w[0] - 1e-7), "CVaR block, seed {seed}: {v:?}");
        let inst = random_cost_instance(100 + seed);
        let v: Vec<f64> = sweep.iter().map(|e| cost_dual(&inst, inst.rho + e)).collect();
        ensure!(v.windows(2).all(|w| w[1] >= w[0] - 1e-7), "cost block, seed {seed}: {v:?}");
        let inst = random_three_bus(seed);
        let mut prev = f64::NEG_INFINITY;
        for e in [0.0, 1.0, 2.0, 4.0, 8.0] {
            let cfg = MethodConfig { rho_excess: e, solver: tight(), ..MethodConfig::new(Method::Drotrimm) };
            let obj = match solve_method(&inst.net, &inst.samples, &inst.ctx, &cfg) {
                Ok(s) => s.objective,
                // A larger budget may exhaust the reserves; that is +∞, still monotone.
                Err(dro_opf::Error::Infeasible { .. }) => f64::INFINITY,
                Err(err) => return Err(format!("DROTRIMM seed {seed}, excess {e}: {err}")),
            };
            ensure!(obj == f64::INFINITY || obj >= prev - 1e-6 * (1.0 + prev.abs()), "DROTRIMM seed {seed}: {obj} after {prev}");
            prev = obj;
        }
    }
    Ok("20 seeds, both blocks and full model".into())
}

fn angle_case(net: &NetworkModel, x: &Dispatch, f: &[f64], omega: &[f64], c_shed: f64) -> AngleCase {
    let bus_index = |id: u32| net.buses.iter().position(|b| b.id == id).unwrap();
    AngleCase {
        loads: net.buses.iter().map(|b| b.load).collect(),
        lines: net.lines.iter().map(|l| (bus_index(l.from), bus_index(l.to), l.reactance, l.capacity)).collect(),
        slack: bus_index(net.slack_bus),
        gens: net
            .generators
            .iter()
            .enumerate()
            .map(|(j, g)| {
                let pieces = g.cost_pieces.iter().map(|p| (p.slope, p.intercept)).collect();
                (bus_index(g.bus), x.g[j], x.r_dn[j], x.r_up[j], pieces, g.c_dn, g.c_up)
            })
            .collect(),
        farms: net.wind_farms.iter().enumerate().map(|(m, w)| (bus_index(w.bus), f[m], omega[m])).collect(),
        c_shed,
    }
}

pub fn redispatch_matches_angles() -> Check {
    let opts = EvalOptions::default();
    // Nominal scenario: nothing to correct.
    let inst = random_three_bus(7);
    let x = nominal_dispatch(&inst.net, &inst.ctx.f);
    let o = redispatch(&inst.net, &x, &inst.ctx.f, &vec![0.0; inst.net.n_wind()], &opts).map_err(|e| e.to_string())?;
    ensure!(
        o.r.iter().all(|r| r.abs() < 1e-7) && o.total_shed() < 1e-7 && o.total_spill() < 1e-7 && !o.violated,
        "zero error: {o:?}"
    );
    // Excess wind beyond all downward reserve must be spilled.
    let surplus: Vec<f64> = inst.ctx.f.iter().zip(&inst.ctx.capacity).map(|(f, c)| c - f).collect();
    let total_dn: f64 = x.r_dn.iter().sum();
    ensure!(surplus.iter().sum::<f64>() > total_dn, "spill scenario not forcing");
    let o = redispatch(&inst.net, &x, &inst.ctx.f, &surplus, &opts).map_err(|e| e.to_string())?;
    ensure!(o.violated && o.total_spill() > 0.0, "forced spill not flagged: {o:?}");

    let mut worst = 0.0_f64;
    let mut r = rng(77);
    for s in 0..100 {
        let inst = random_three_bus(1000 + s);
        let x = random_dispatch(&mut r, &inst.net, &inst.ctx.f);
        let omega: Vec<f64> =
            inst.ctx.f.iter().zip(&inst.ctx.capacity).map(|(f, c)| r.gen_range(-f..=c - f)).collect();
        let o = redispatch(&inst.net, &x, &inst.ctx.f, &omega, &opts).map_err(|e| format!("scenario {s}: {e}"))?;
        let (cost, shed, spill) = oracles::redispatch_by_angles(&angle_case(&inst.net, &x, &inst.ctx.f, &omega, opts.c_shed));
        let gap = (o.cost - cost).abs();
        worst = worst.max(gap);
        ensure!(gap <= 1e-6 * (1.0 + cost.abs()), "scenario {s}: {} vs angle model {cost}", o.cost);
        ensure!((o.total_shed() - shed).abs() <= 1e-6 || gap <= 1e-9, "scenario {s}: shed {} vs {shed}", o.total_shed());
        let _ = spill;
    }
    Ok(format!("trivial cases ok, 100 scenarios, max cost gap {worst:.1e}"))
}

pub fn data_generator_moments() -> Check {
    ensure!(sigma_of_forecast(0.9) == 0.2 && sigma_of_forecast(0.0) == 0.02, "sigma formula");
    for (mean, sigma) in [(0.5, 0.12), (0.05, 0.03), (0.9, 0.2), (0.3, 0.08)] {
        let p = fit_beta(mean, sigma).map_err(|e| e.to_string())?;
        ensure!((p.mean() - mean).abs() <= 1e-12, "beta mean {mean}");
        ensure!((p.variance() - sigma * sigma).abs() <= 1e-12, "beta variance {sigma}");
    }
    let n = 100_000;
    let sc = generate_test_set(&[180.0], &[200.0], n, 11).map_err(|e| e.to_string())?;
    let mean = sc.iter().map(|s| s[0]).sum::<f64>() / n as f64;
    let var = sc.iter().map(|s| (s[0] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    ensure!((sd - 40.0).abs() <= 0.02 * 40.0, "empirical std {sd}");
    Ok(format!("std {sd:.3} MW vs 40 MW"))
}

pub fn model_size_audit() -> Check {
    for (n, k, n_w) in [(1, 1, 1), (3, 2, 1), (4, 3, 2), (5, 4, 3), (7, 6, 8)] {
        let caps = vec![10.0; n_w];
        let f: Vec<f64> = (0..n_w).map(|m| 3.0 + m as f64).collect();
        let ctx = Context::new(f.clone(), caps).map_err(|e| e.to_string())?;
        let z: Vec<Vec<f64>> = (0..n).map(|i| f.iter().map(|v| v + i as f64 * 0.1).collect()).collect();
        let w: Vec<Vec<f64>> = (0..n).map(|i| (0..n_w).map(|m| (i + m) as f64 * 0.3 - 1.0).collect()).collect();
        let samples = JointSampleSet::new((1..=n_w as u32).collect(), &z, &w).map_err(|e| e.to_string())?;
        let rows: Vec<ChanceRow> = (0..k)
            .map(|kk| ChanceRow {
                tag: Label::at("row", kk),
                a1: (0..n_w).map(|m| LinExpr::constant(0.1 * (kk + m) as f64 - 0.2)).collect(),
                a2: LinExpr::constant(-(kk as f64) - 1.0),
            })
            .collect();
        let mut model = LpModel::new();
        let params = CvarParams { alpha: 1.0, rho: 100.0, epsilon: 0.1, context_scale: 1.0 };
        let block = emit_cvar_block(&rows, &samples, &ctx, &params, &mut model, true).map_err(|e| e.to_string())?;
        let pairs = n * (k + 1);
        ensure!(block.n_pairs == pairs, "({n},{k},{n_w}): {} pairs, expected {pairs}", block.n_pairs);
        for kind in ["cvar_gamma_pos", "cvar_gamma_neg", "cvar_v_pos", "cvar_v_neg"] {
            let got = model.count_vars(kind);
            ensure!(got == pairs * n_w, "({n},{k},{n_w}): {got} {kind} entries, expected {}", pairs * n_w);
        }
        let want = pairs * (2 * n_w + 1) + n + 1;
        let got = CvarBlock::count_rows(&model);
        ensure!(got == want, "({n},{k},{n_w}): {got} rows, expected {want}");
    }
    Ok("5 shapes, vectors and rows exact".into())
}
