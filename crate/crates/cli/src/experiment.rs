//! The (method × N × ρ_excess × run) grid.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context as _, Result};
use dro_opf::datagen::{derive_seed, generate_joint_samples, generate_test_set, ForecastPool};
use dro_opf::evaluate::evaluate;
use dro_opf::grid::NetworkModel;
use dro_opf::methods::{solve_method, Method, MethodConfig, RhoMode};
use dro_opf::uncertainty::{Context, JointSampleSet};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::summary::{optimal_rho, summarize, write_csv};

/// One solved and evaluated grid point. Failed points keep their
/// coordinates and the error text; metric columns stay empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub rho_excess: Option<f64>,
    pub run: usize,
    pub expected_cost: Option<f64>,
    pub violation_prob: Option<f64>,
    #[serde(rename = "sum_rU")]
    pub sum_r_up: Option<f64>,
    #[serde(rename = "sum_rD")]
    pub sum_r_dn: Option<f64>,
    pub direct_violation_prob: Option<f64>,
    pub objective: Option<f64>,
    pub status: String,
    pub error: String,
    pub seed: u64,
    pub alpha: Option<f64>,
    pub k_n: Option<usize>,
    pub rho_min_joint: Option<f64>,
    pub rho_min_agg: Option<f64>,
    pub rho_cc: Option<f64>,
    pub rho_cost: Option<f64>,
    pub rho_mode: Option<RhoMode>,
    pub lp_rows: Option<usize>,
    pub lp_vars: Option<usize>,
    pub iterations: Option<u32>,
    pub solve_secs: Option<f64>,
}

impl ResultRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub rho_values: Vec<f64>,
    pub capacity: Vec<f64>,
    pub context: Vec<f64>,
    /// Training data for run r uses `derive_seed(seed, r)`; the test set
    /// uses the same seed on a separate stream.
    pub run_seeds: Vec<u64>,
    pub rows: usize,
    pub failed: usize,
    pub started_unix: u64,
    pub elapsed_secs: f64,
    pub std_convention: String,
}

pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub manifest: Manifest,
}

struct RunData {
    seed: u64,
    samples: JointSampleSet,
    test: Vec<Vec<f64>>,
}

struct Task {
    method: MethodConfig,
    n: usize,
    rho: Option<f64>,
    run: usize,
}

/// Runs the whole grid. Results come back in grid order whatever the
/// worker count.
pub fn run_experiment(cfg: &ExperimentConfig, progress: bool) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let base = NetworkModel::from_file(&cfg.grid).with_context(|| format!("loading grid {}", cfg.grid.display()))?;
    let pool = ForecastPool::load(&cfg.pool).with_context(|| format!("loading pool {}", cfg.pool.display()))?;
    let grid_caps: Vec<f64> = base.wind_farms.iter().map(|w| w.capacity).collect();
    let (capacity, context) = cfg.wind_setup(&grid_caps)?;
    let mut net = base;
    for (w, c) in net.wind_farms.iter_mut().zip(&capacity) {
        w.capacity = *c;
    }
    let ctx = Context::new(context.clone(), capacity.clone())?;
    let farm_ids: Vec<u32> = net.wind_farms.iter().map(|w| w.id).collect();
    let rho_values = cfg.rho_values()?;
    let n_max = *cfg.sample_sizes.iter().max().unwrap();

    let workers = if cfg.workers == 0 { rayon::current_num_threads() } else { cfg.workers };
    let threads = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;

    // Sample sets are nested: the N-sample set is a prefix of the largest.
    let data: Vec<RunData> = threads.install(|| {
        (0..cfg.runs)
            .into_par_iter()
            .map(|run| -> Result<RunData> {
                let seed = derive_seed(cfg.seed, run as u64);
                Ok(RunData {
                    seed,
                    samples: generate_joint_samples(&pool, &farm_ids, &capacity, n_max, seed)?,
                    test: generate_test_set(&context, &capacity, cfg.test_size, seed)?,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut tasks = Vec::new();
    for method in cfg.method_configs() {
        for &n in &cfg.sample_sizes {
            let rhos: Vec<Option<f64>> =
                if method.method == Method::Scena { vec![None] } else { rho_values.iter().map(|&r| Some(r)).collect() };
            for rho in rhos {
                for run in 0..cfg.runs {
                    tasks.push(Task { method: method.clone(), n, rho, run });
                }
            }
        }
    }

    let done = AtomicUsize::new(0);
    let total = tasks.len();
    let rows: Vec<ResultRow> = threads.install(|| {
        tasks
            .par_iter()
            .map(|t| {
                let row = run_task(&net, &ctx, &data[t.run], t, cfg);
                let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                if progress {
                    let note = if row.ok() { String::new() } else { format!(" FAILED: {}", row.error) };
                    eprintln!(
                        "[{k}/{total}] {} N={} rho={} run={}{note}",
                        row.method,
                        row.n,
                        row.rho_excess.map_or("-".into(), |r| format!("{r}")),
                        row.run
                    );
                }
                row
            })
            .collect()
    });

    let failed = rows.iter().filter(|r| !r.ok()).count();
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        rho_values,
        capacity,
        context,
        run_seeds: data.iter().map(|d| d.seed).collect(),
        rows: rows.len(),
        failed,
        started_unix,
        elapsed_secs: started.elapsed().as_secs_f64(),
        std_convention: "sample standard deviation, n-1 denominator".into(),
    };
    Ok(ExperimentOutput { rows, manifest })
}

fn run_task(net: &NetworkModel, ctx: &Context, data: &RunData, t: &Task, cfg: &ExperimentConfig) -> ResultRow {
    let mut row = ResultRow {
        method: t.method.method.to_string(),
        n: t.n,
        rho_excess: t.rho,
        run: t.run,
        seed: data.seed,
        ..Default::default()
    };
    let samples = data.samples.select(&(0..t.n).collect::<Vec<_>>());
    let method = MethodConfig { rho_excess: t.rho.unwrap_or(0.0), ..t.method.clone() };
    let outcome = solve_method(net, &samples, ctx, &method).and_then(|sol| {
        let report = evaluate(net, &sol.dispatch, &ctx.f, &data.test, &cfg.evaluation)?;
        Ok((sol, report))
    });
    match outcome {
        Ok((sol, report)) => {
            let m = &sol.meta;
            row.expected_cost = Some(report.expected_cost);
            row.violation_prob = Some(report.violation_prob);
            row.direct_violation_prob = Some(report.direct_violation_prob);
            row.sum_r_up = Some(sol.dispatch.r_up.iter().sum());
            row.sum_r_dn = Some(sol.dispatch.r_dn.iter().sum());
            row.objective = Some(sol.objective);
            row.status = "ok".into();
            row.alpha = m.alpha;
            row.k_n = m.k_n;
            row.rho_min_joint = m.rho_min_joint;
            row.rho_min_agg = m.rho_min_agg;
            row.rho_cc = m.rho_cc;
            row.rho_cost = m.rho_cost;
            row.rho_mode = m.rho_mode;
            row.lp_rows = Some(m.rows);
            row.lp_vars = Some(m.vars);
            row.iterations = Some(m.iterations);
            row.solve_secs = Some(sol.solve_secs);
        }
        Err(e) => {
            row.status = "failed".into();
            row.error = e.to_string();
        }
    }
    row
}

/// Writes results.csv, summary.csv, optimal.csv and manifest.json.
pub fn write_outputs(dir: &Path, out: &ExperimentOutput) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_csv(dir.join("results.csv"), &out.rows)?;
    let summary = summarize(&out.rows)?;
    write_csv(dir.join("summary.csv"), &summary)?;
    write_csv(dir.join("optimal.csv"), &optimal_rho(&summary, out.manifest.config.epsilon))?;
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&out.manifest)?)?;
    Ok(())
}
