//! Aggregate tables over result rows.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{bail, Context as _, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::experiment::ResultRow;

/// Statistics of one (method, N, ρ_excess) group over its successful runs.
/// `cost_std` uses the n−1 denominator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub rho_excess: Option<f64>,
    pub runs: usize,
    pub failed: usize,
    pub cost_max: Option<f64>,
    pub cost_avg: Option<f64>,
    pub cost_min: Option<f64>,
    #[serde(rename = "cost_std_n_minus_1")]
    pub cost_std: Option<f64>,
    pub violation_avg: Option<f64>,
    #[serde(rename = "sum_rU_avg")]
    pub sum_r_up_avg: Option<f64>,
    #[serde(rename = "sum_rD_avg")]
    pub sum_r_dn_avg: Option<f64>,
}

/// Per (method, N): the ρ_excess with the lowest average cost among those
/// whose mean violation probability is within ε, or `none`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalRow {
    pub method: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub rho_excess: String,
    pub cost_max: Option<f64>,
    pub cost_avg: Option<f64>,
    pub cost_min: Option<f64>,
    #[serde(rename = "cost_std_n_minus_1")]
    pub cost_std: Option<f64>,
    pub violation_avg: Option<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Sample standard deviation; zero for a single value.
pub fn sample_std(v: &[f64]) -> Option<f64> {
    let m = mean(v)?;
    if v.len() == 1 {
        return Some(0.0);
    }
    Some((v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
}

type Key = (String, usize, Option<u64>);

fn key(r: &ResultRow) -> Key {
    (r.method.clone(), r.n, r.rho_excess.map(f64::to_bits))
}

/// Groups rows by (method, N, ρ_excess) in order of first appearance.
pub fn summarize(rows: &[ResultRow]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        bail!("no result rows to summarize");
    }
    let mut order: Vec<Key> = Vec::new();
    let mut groups: HashMap<Key, Vec<&ResultRow>> = HashMap::new();
    for r in rows {
        let k = key(r);
        groups.entry(k.clone()).or_insert_with(|| {
            order.push(k);
            Vec::new()
        });
        groups.get_mut(&key(r)).unwrap().push(r);
    }
    Ok(order
        .into_iter()
        .map(|k| {
            let g = &groups[&k];
            let good: Vec<&&ResultRow> = g.iter().filter(|r| r.ok()).collect();
            let col = |f: fn(&ResultRow) -> Option<f64>| -> Vec<f64> { good.iter().filter_map(|r| f(r)).collect() };
            let cost = col(|r| r.expected_cost);
            SummaryRow {
                method: k.0.clone(),
                n: k.1,
                rho_excess: k.2.map(f64::from_bits),
                runs: g.len(),
                failed: g.len() - good.len(),
                cost_max: cost.iter().copied().reduce(f64::max),
                cost_avg: mean(&cost),
                cost_min: cost.iter().copied().reduce(f64::min),
                cost_std: sample_std(&cost),
                violation_avg: mean(&col(|r| r.violation_prob)),
                sum_r_up_avg: mean(&col(|r| r.sum_r_up)),
                sum_r_dn_avg: mean(&col(|r| r.sum_r_dn)),
            }
        })
        .collect())
}

pub fn optimal_rho(summary: &[SummaryRow], epsilon: f64) -> Vec<OptimalRow> {
    let mut order: Vec<(String, usize)> = Vec::new();
    for s in summary {
        let k = (s.method.clone(), s.n);
        if !order.contains(&k) {
            order.push(k);
        }
    }
    order
        .into_iter()
        .map(|(method, n)| {
            let best = summary
                .iter()
                .filter(|s| s.method == method && s.n == n)
                .filter(|s| s.violation_avg.is_some_and(|v| v <= epsilon + 1e-12) && s.cost_avg.is_some())
                .min_by(|a, b| a.cost_avg.unwrap().total_cmp(&b.cost_avg.unwrap()));
            match best {
                Some(s) => OptimalRow {
                    method,
                    n,
                    rho_excess: s.rho_excess.map_or("-".into(), |r| format!("{r}")),
                    cost_max: s.cost_max,
                    cost_avg: s.cost_avg,
                    cost_min: s.cost_min,
                    cost_std: s.cost_std,
                    violation_avg: s.violation_avg,
                },
                None => OptimalRow {
                    method,
                    n,
                    rho_excess: "none".into(),
                    cost_max: None,
                    cost_avg: None,
                    cost_min: None,
                    cost_std: None,
                    violation_avg: None,
                },
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}
