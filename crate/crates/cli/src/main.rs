use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{bail, Context as _, Result};
use clap::{Parser, Subcommand};
use dro_opf::datagen::{generate_joint_samples, generate_test_set, ForecastPool};
use dro_opf::evaluate::{evaluate, EvalOptions};
use dro_opf::grid::NetworkModel;
use dro_opf::methods::{solve_method, DispatchSolution, Method, MethodConfig};
use dro_opf::uncertainty::{read_error_scenarios, write_error_scenarios, Context, JointSampleSet};
use dro_opf_cli::config::ExperimentConfig;
use dro_opf_cli::experiment::{run_experiment, write_outputs, ResultRow};
use dro_opf_cli::summary::{optimal_rho, read_csv, summarize, write_csv};

#[derive(Parser)]
#[command(name = "dro-opf", version, about = "Contextual distributionally robust DC-OPF experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a full experiment grid from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the output directory in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Rebuild summary.csv and optimal.csv from a results directory.
    Summarize {
        dir: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
    },
    /// Write a training sample set, and optionally a test set.
    GenData {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Farm capacity in MW for every farm; defaults to the grid file.
        #[arg(long)]
        capacity: Option<f64>,
        /// Number of test scenarios, written next to `out` with a `.test.csv` suffix.
        #[arg(long)]
        test: Option<usize>,
        /// Forecast per farm in MW for the test set, comma separated.
        #[arg(long, value_delimiter = ',')]
        context: Option<Vec<f64>>,
    },
    /// Solve one dispatch problem and write it as JSON.
    Solve {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        method: Method,
        #[arg(long, default_value_t = 0.0)]
        rho_excess: f64,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, value_delimiter = ',')]
        context: Vec<f64>,
        #[arg(long)]
        capacity: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-dispatch a solved schedule against error scenarios.
    Evaluate {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long)]
        capacity: Option<f64>,
        #[arg(long, default_value_t = 500.0)]
        c_shed: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_grid(path: &PathBuf, capacity: Option<f64>) -> Result<NetworkModel> {
    let net = NetworkModel::from_file(path).with_context(|| format!("loading grid {}", path.display()))?;
    Ok(match capacity {
        Some(c) => net.with_wind_capacity(c),
        None => net,
    })
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Run { config, out, quiet } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.clone());
            let result = run_experiment(&cfg, !quiet)?;
            write_outputs(&dir, &result)?;
            eprintln!(
                "{} rows ({} failed) in {:.1}s, written to {}",
                result.manifest.rows,
                result.manifest.failed,
                result.manifest.elapsed_secs,
                dir.display()
            );
        }
        Cmd::Summarize { dir, epsilon } => {
            let rows: Vec<ResultRow> = read_csv(dir.join("results.csv"))?;
            let summary = summarize(&rows)?;
            write_csv(dir.join("summary.csv"), &summary)?;
            write_csv(dir.join("optimal.csv"), &optimal_rho(&summary, epsilon))?;
        }
        Cmd::GenData { grid, pool, n, seed, out, capacity, test, context } => {
            let net = load_grid(&grid, capacity)?;
            let pool = ForecastPool::load(&pool)?;
            let ids: Vec<u32> = net.wind_farms.iter().map(|w| w.id).collect();
            let caps: Vec<f64> = net.wind_farms.iter().map(|w| w.capacity).collect();
            generate_joint_samples(&pool, &ids, &caps, n, seed)?.save(&out)?;
            if let Some(m) = test {
                let Some(f) = context else { bail!("--test needs --context") };
                let set = generate_test_set(&f, &caps, m, seed)?;
                let path = out.with_extension("test.csv");
                write_error_scenarios(BufWriter::new(File::create(&path)?), &ids, &set)?;
            }
        }
        Cmd::Solve { grid, samples, method, rho_excess, epsilon, context, capacity, out } => {
            let net = load_grid(&grid, capacity)?;
            let samples = JointSampleSet::load(&samples)?;
            let caps = net.wind_farms.iter().map(|w| w.capacity).collect();
            let ctx = Context::new(context, caps)?;
            let cfg = MethodConfig { epsilon, rho_excess, ..MethodConfig::new(method) };
            let sol = solve_method(&net, &samples, &ctx, &cfg)?;
            sol.save(&out)?;
            eprintln!("{}: objective {:.4}, solved in {:.2}s", sol.status, sol.objective, sol.solve_secs);
        }
        Cmd::Evaluate { grid, solution, scenarios, capacity, c_shed, out } => {
            let net = load_grid(&grid, capacity)?;
            let sol = DispatchSolution::load(&solution)?;
            let (_, omega) = read_error_scenarios(File::open(&scenarios)?)?;
            let opts = EvalOptions { c_shed, ..EvalOptions::default() };
            let report = evaluate(&net, &sol.dispatch, &sol.meta.forecast, &omega, &opts)?;
            let text = serde_json::to_string_pretty(&report)?;
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => println!(
                    "expected_cost {:.4}\nviolation_prob {:.4}\nscenarios {}",
                    report.expected_cost, report.violation_prob, report.n
                ),
            }
        }
    }
    Ok(())
}
