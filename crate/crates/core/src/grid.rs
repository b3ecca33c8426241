//! DC network model, power transfer distribution factors and the
//! deterministic part of the dispatch problem.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{Label, LinExpr, LpModel, LpSolution, Sense, VarId};

/// One affine piece `slope·p + intercept` of a generator cost curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostPiece {
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: u32,
    pub bus: u32,
    pub g_min: f64,
    pub g_max: f64,
    /// Pieces of the convex cost `max_s slope_s·p + intercept_s` in $/h.
    pub cost_pieces: Vec<CostPiece>,
    /// Downward reserve capacity cost, $/MW.
    pub c_dn: f64,
    /// Upward reserve capacity cost, $/MW.
    pub c_up: f64,
}

impl Generator {
    /// Production cost at output `p`.
    pub fn cost(&self, p: f64) -> f64 {
        self.cost_pieces
            .iter()
            .map(|c| c.slope * p + c.intercept)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindFarm {
    pub id: u32,
    pub bus: u32,
    /// Installed capacity, MW.
    pub capacity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: u32,
    /// Deterministic load, MW.
    #[serde(default)]
    pub load: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: u32,
    pub from: u32,
    pub to: u32,
    /// Series reactance, p.u.
    pub reactance: f64,
    /// Thermal limit, MW.
    pub capacity: f64,
}

/// Row-major PTDF blocks as stored in grid files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PtdfRows {
    pub generators: Vec<Vec<f64>>,
    pub wind_farms: Vec<Vec<f64>>,
    pub buses: Vec<Vec<f64>>,
}

/// On-disk grid document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFile {
    #[serde(default)]
    pub name: String,
    pub slack_bus: u32,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub wind_farms: Vec<WindFarm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ptdf: Option<PtdfRows>,
}

/// Line-flow sensitivities: `flow = gen·g + wind·w − bus·L`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ptdf {
    /// |L|×|G|
    pub generators: DMatrix<f64>,
    /// |L|×|W|
    pub wind_farms: DMatrix<f64>,
    /// |L|×|B|
    pub buses: DMatrix<f64>,
}

/// Immutable DC network with its PTDF matrices.
#[derive(Clone, Debug)]
pub struct NetworkModel {
    pub name: String,
    pub slack_bus: u32,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub wind_farms: Vec<WindFarm>,
    pub ptdf: Ptdf,
}

impl NetworkModel {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::new(serde_json::from_str(text)?)
    }

    /// Validates the document and computes the PTDF blocks unless they are
    /// supplied.
    pub fn new(file: GridFile) -> Result<Self> {
        validate(&file)?;
        let ptdf = match &file.ptdf {
            Some(rows) => {
                let l = file.lines.len();
                let to_mat = |rows: &[Vec<f64>], cols: usize, what: &str| -> Result<DMatrix<f64>> {
                    if rows.len() != l || rows.iter().any(|r| r.len() != cols) {
                        return Err(Error::Network(format!(
                            "ptdf block `{what}` must be {l}x{cols}"
                        )));
                    }
                    Ok(DMatrix::from_fn(l, cols, |i, j| rows[i][j]))
                };
                Ptdf {
                    generators: to_mat(&rows.generators, file.generators.len(), "generators")?,
                    wind_farms: to_mat(&rows.wind_farms, file.wind_farms.len(), "wind_farms")?,
                    buses: to_mat(&rows.buses, file.buses.len(), "buses")?,
                }
            }
            None => compute_ptdf(&file)?,
        };
        Ok(NetworkModel {
            name: file.name,
            slack_bus: file.slack_bus,
            buses: file.buses,
            lines: file.lines,
            generators: file.generators,
            wind_farms: file.wind_farms,
            ptdf,
        })
    }

    pub fn to_file(&self, include_ptdf: bool) -> GridFile {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
        };
        GridFile {
            name: self.name.clone(),
            slack_bus: self.slack_bus,
            buses: self.buses.clone(),
            lines: self.lines.clone(),
            generators: self.generators.clone(),
            wind_farms: self.wind_farms.clone(),
            ptdf: include_ptdf.then(|| PtdfRows {
                generators: rows(&self.ptdf.generators),
                wind_farms: rows(&self.ptdf.wind_farms),
                buses: rows(&self.ptdf.buses),
            }),
        }
    }

    pub fn n_gen(&self) -> usize {
        self.generators.len()
    }

    pub fn n_wind(&self) -> usize {
        self.wind_farms.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn loads(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.load).collect()
    }

    pub fn total_load(&self) -> f64 {
        self.buses.iter().map(|b| b.load).sum()
    }

    pub fn wind_capacities(&self) -> Vec<f64> {
        self.wind_farms.iter().map(|w| w.capacity).collect()
    }

    /// Returns a copy with every wind farm set to `capacity` MW.
    pub fn with_wind_capacity(&self, capacity: f64) -> Self {
        let mut out = self.clone();
        for w in &mut out.wind_farms {
            w.capacity = capacity;
        }
        out
    }

    /// Line flows `M^G·gen + M^W·wind − M^B·withdrawal`.
    pub fn flows(&self, gen: &[f64], wind: &[f64], withdrawal: &[f64]) -> Vec<f64> {
        let p = &self.ptdf;
        (0..self.n_lines())
            .map(|l| {
                let g: f64 = gen.iter().enumerate().map(|(j, x)| p.generators[(l, j)] * x).sum();
                let w: f64 = wind.iter().enumerate().map(|(m, x)| p.wind_farms[(l, m)] * x).sum();
                let b: f64 = withdrawal.iter().enumerate().map(|(b, x)| p.buses[(l, b)] * x).sum();
                g + w - b
            })
            .collect()
    }

    /// Constant part of every line flow: `−M^B·L`.
    pub fn load_flows(&self) -> Vec<f64> {
        let loads = self.loads();
        self.flows(&vec![0.0; self.n_gen()], &vec![0.0; self.n_wind()], &loads)
    }
}

fn validate(file: &GridFile) -> Result<()> {
    let mut buses = HashMap::new();
    for (i, b) in file.buses.iter().enumerate() {
        if buses.insert(b.id, i).is_some() {
            return Err(Error::Network(format!("duplicate bus id {}", b.id)));
        }
        if !(b.load >= 0.0) {
            return Err(Error::Network(format!("bus {} has negative load {}", b.id, b.load)));
        }
    }
    if !buses.contains_key(&file.slack_bus) {
        return Err(Error::Network(format!("slack bus {} does not exist", file.slack_bus)));
    }
    for l in &file.lines {
        if !buses.contains_key(&l.from) || !buses.contains_key(&l.to) {
            return Err(Error::Network(format!("line {} connects unknown buses", l.id)));
        }
        if !(l.capacity > 0.0) {
            return Err(Error::Network(format!("line {} has non-positive capacity", l.id)));
        }
    }
    for g in &file.generators {
        if !buses.contains_key(&g.bus) {
            return Err(Error::Network(format!("generator {} sits at unknown bus {}", g.id, g.bus)));
        }
        if !(g.g_min <= g.g_max) {
            return Err(Error::Network(format!("generator {} has g_min > g_max", g.id)));
        }
        if g.cost_pieces.is_empty() {
            return Err(Error::Network(format!("generator {} has no cost pieces", g.id)));
        }
        if g.c_dn < 0.0 || g.c_up < 0.0 {
            return Err(Error::Network(format!("generator {} has negative reserve cost", g.id)));
        }
    }
    for w in &file.wind_farms {
        if !buses.contains_key(&w.bus) {
            return Err(Error::Network(format!("wind farm {} sits at unknown bus {}", w.id, w.bus)));
        }
        if !(w.capacity > 0.0) {
            return Err(Error::Network(format!("wind farm {} has non-positive capacity", w.id)));
        }
    }
    Ok(())
}

/// PTDF blocks from the reduced nodal susceptance matrix (slack row and
/// column removed); the slack bus absorbs every imbalance.
pub fn compute_ptdf(file: &GridFile) -> Result<Ptdf> {
    let pos: HashMap<u32, usize> = file.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
    let nb = file.buses.len();
    let slack = *pos
        .get(&file.slack_bus)
        .ok_or_else(|| Error::Network(format!("slack bus {} does not exist", file.slack_bus)))?;

    let mut adj = vec![Vec::new(); nb];
    for l in &file.lines {
        if !(l.reactance > 0.0) {
            return Err(Error::Network(format!("line {} has non-positive reactance", l.id)));
        }
        let (a, b) = (pos[&l.from], pos[&l.to]);
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; nb];
    seen[slack] = true;
    let mut queue = VecDeque::from([slack]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::Disconnected(file.buses[i].id));
    }

    // Reduced index of every non-slack bus.
    let red: Vec<Option<usize>> = (0..nb)
        .scan(0usize, |next, i| {
            Some(if i == slack {
                None
            } else {
                *next += 1;
                Some(*next - 1)
            })
        })
        .collect();
    let n = nb - 1;
    let mut bmat = DMatrix::<f64>::zeros(n, n);
    for l in &file.lines {
        let y = 1.0 / l.reactance;
        let (a, b) = (red[pos[&l.from]], red[pos[&l.to]]);
        if let Some(a) = a {
            bmat[(a, a)] += y;
        }
        if let Some(b) = b {
            bmat[(b, b)] += y;
        }
        if let (Some(a), Some(b)) = (a, b) {
            bmat[(a, b)] -= y;
            bmat[(b, a)] -= y;
        }
    }
    let inv = if n == 0 {
        DMatrix::zeros(0, 0)
    } else {
        let inv = bmat.lu().try_inverse().ok_or(Error::SingularSusceptance)?;
        if inv.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSusceptance);
        }
        inv
    };
    let angle = |bus: usize, inj: usize| -> f64 {
        match (red[bus], red[inj]) {
            (Some(r), Some(c)) => inv[(r, c)],
            _ => 0.0,
        }
    };
    let nl = file.lines.len();
    let bus_ptdf = DMatrix::from_fn(nl, nb, |l, k| {
        let line = &file.lines[l];
        (angle(pos[&line.from], k) - angle(pos[&line.to], k)) / line.reactance
    });
    let columns = |buses: Vec<u32>| -> DMatrix<f64> {
        DMatrix::from_fn(nl, buses.len(), |l, j| bus_ptdf[(l, pos[&buses[j]])])
    };
    Ok(Ptdf {
        generators: columns(file.generators.iter().map(|g| g.bus).collect()),
        wind_farms: columns(file.wind_farms.iter().map(|w| w.bus).collect()),
        buses: bus_ptdf,
    })
}

/// First-stage decision `x = (g, β, r^D, r^U)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    pub g: Vec<f64>,
    pub beta: Vec<f64>,
    pub r_dn: Vec<f64>,
    pub r_up: Vec<f64>,
}

impl Dispatch {
    pub fn reserve_cost(&self, net: &NetworkModel) -> f64 {
        net.generators
            .iter()
            .enumerate()
            .map(|(j, gen)| gen.c_dn * self.r_dn[j] + gen.c_up * self.r_up[j])
            .sum()
    }

    /// Generation cost `C(g − β·Ω)` at aggregate error `omega`.
    pub fn generation_cost(&self, net: &NetworkModel, omega: f64) -> f64 {
        net.generators
            .iter()
            .enumerate()
            .map(|(j, gen)| gen.cost(self.g[j] - self.beta[j] * omega))
            .sum()
    }

    /// Largest scaled residual of the deterministic rows at this decision;
    /// zero when the dispatch lies in the deterministic feasible set.
    pub fn residual(&self, net: &NetworkModel, forecast: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        let mut note = |raw: f64, scale: f64| worst = worst.max(raw.max(0.0) / (1.0 + scale.abs()));
        for (j, gen) in net.generators.iter().enumerate() {
            note(self.g[j] + self.r_up[j] - gen.g_max, gen.g_max);
            note(gen.g_min - (self.g[j] - self.r_dn[j]), gen.g_min);
            note(-self.beta[j], 0.0);
            note(-self.r_dn[j], 0.0);
            note(-self.r_up[j], 0.0);
        }
        let load = net.total_load();
        let supply: f64 = self.g.iter().sum::<f64>() + forecast.iter().sum::<f64>();
        note((supply - load).abs(), load);
        note((self.beta.iter().sum::<f64>() - 1.0).abs(), 1.0);
        worst
    }
}

/// Model columns holding the first-stage decision.
#[derive(Clone, Debug)]
pub struct DispatchVars {
    pub g: Vec<VarId>,
    pub beta: Vec<VarId>,
    pub r_dn: Vec<VarId>,
    pub r_up: Vec<VarId>,
}

impl DispatchVars {
    /// Adds `g` (free), `β ≥ 0`, `r^D ≥ 0`, `r^U ≥ 0` for every generator.
    pub fn add_to(model: &mut LpModel, n_gen: usize) -> Self {
        DispatchVars {
            g: (0..n_gen).map(|j| model.add_free_var(Label::at("g", j))).collect(),
            beta: (0..n_gen).map(|j| model.add_nonneg_var(Label::at("beta", j))).collect(),
            r_dn: (0..n_gen).map(|j| model.add_nonneg_var(Label::at("r_dn", j))).collect(),
            r_up: (0..n_gen).map(|j| model.add_nonneg_var(Label::at("r_up", j))).collect(),
        }
    }

    pub fn extract(&self, sol: &LpSolution) -> Dispatch {
        Dispatch {
            g: sol.values(&self.g),
            beta: sol.values(&self.beta),
            r_dn: sol.values(&self.r_dn),
            r_up: sol.values(&self.r_up),
        }
    }

    /// Pins every decision column to `x`.
    pub fn fix(&self, model: &mut LpModel, x: &Dispatch) {
        let pairs = [(&self.g, &x.g), (&self.beta, &x.beta), (&self.r_dn, &x.r_dn), (&self.r_up, &x.r_up)];
        for (vars, vals) in pairs {
            for (&v, &val) in vars.iter().zip(vals.iter()) {
                model.fix(v, val);
            }
        }
    }

    /// `⟨c^D, r^D⟩ + ⟨c^U, r^U⟩`
    pub fn reserve_cost(&self, net: &NetworkModel) -> LinExpr {
        let mut e = LinExpr::new();
        for (j, gen) in net.generators.iter().enumerate() {
            e.add_term(self.r_dn[j], gen.c_dn).add_term(self.r_up[j], gen.c_up);
        }
        e
    }

    /// `g_j − β_j·omega`
    pub fn output_at(&self, j: usize, omega: f64) -> LinExpr {
        LinExpr::var(self.g[j]).with(self.beta[j], -omega)
    }
}

/// Emits the deterministic feasible set: generation/reserve limits, nominal
/// power balance and `Σβ = 1`. Sign constraints on `β, r^D, r^U` are
/// variable bounds set by [`DispatchVars::add_to`].
pub fn deterministic_rows(net: &NetworkModel, forecast: &[f64], model: &mut LpModel, x: &DispatchVars) {
    for (j, gen) in net.generators.iter().enumerate() {
        model.add_row(
            Label::at("gen_up", j),
            LinExpr::var(x.g[j]).with(x.r_up[j], 1.0),
            Sense::Le,
            gen.g_max,
        );
        model.add_row(
            Label::at("gen_dn", j),
            LinExpr::var(x.g[j]).with(x.r_dn[j], -1.0),
            Sense::Ge,
            gen.g_min,
        );
    }
    let net_load = net.total_load() - forecast.iter().sum::<f64>();
    model.add_row(
        Label::new("balance"),
        LinExpr::from_terms(x.g.iter().map(|&v| (v, 1.0))),
        Sense::Eq,
        net_load,
    );
    model.add_row(
        Label::new("participation"),
        LinExpr::from_terms(x.beta.iter().map(|&v| (v, 1.0))),
        Sense::Eq,
        1.0,
    );
}

/// Rows `t ≥ slope_s·arg + intercept_s` for every cost piece of `gen`.
pub fn cost_epigraph_rows(
    model: &mut LpModel,
    gen: &Generator,
    t: VarId,
    arg: &LinExpr,
    label: impl Fn(usize) -> Label,
) {
    for (s, piece) in gen.cost_pieces.iter().enumerate() {
        let mut e = LinExpr::var(t);
        e.add_scaled(arg, -piece.slope);
        model.add_row(label(s), e, Sense::Ge, piece.intercept);
    }
}
