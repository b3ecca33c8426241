//! Solver-agnostic sparse linear programs.
//!
//! Every reformulation in this crate emits rows into an [`LpModel`]. The model
//! only ever minimizes; variables are addressed by [`VarId`] and rows carry a
//! structured [`Label`] naming the constraint family and indices they encode.

mod format;
mod solve;

use std::collections::HashSet;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

pub use format::{read_lp, write_lp};
pub use solve::{solve, Backend, LpSolution, LpStatus, SolveStats, SolverOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(u32);

impl VarId {
    pub(crate) fn from_index(i: usize) -> Self {
        VarId(u32::try_from(i).expect("variable index overflow"))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(u32);

impl RowId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Structured name of a row or variable: a family plus up to three indices.
///
/// Displays as `family.i.j.k`, which is also a valid LP-format identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Label {
    kind: &'static str,
    idx: [u32; 3],
    arity: u8,
}

impl Label {
    pub const fn new(kind: &'static str) -> Self {
        Label { kind, idx: [0; 3], arity: 0 }
    }

    pub fn at(kind: &'static str, i: usize) -> Self {
        Label { kind, idx: [i as u32, 0, 0], arity: 1 }
    }

    pub fn at2(kind: &'static str, i: usize, j: usize) -> Self {
        Label { kind, idx: [i as u32, j as u32, 0], arity: 2 }
    }

    pub fn at3(kind: &'static str, i: usize, j: usize, k: usize) -> Self {
        Label { kind, idx: [i as u32, j as u32, k as u32], arity: 3 }
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }

    pub fn indices(&self) -> &[u32] {
        &self.idx[..self.arity as usize]
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind)?;
        for i in self.indices() {
            write!(f, ".{i}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

/// Affine expression `Σ c_v·v + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    terms: Vec<(VarId, f64)>,
    constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn var(v: VarId) -> Self {
        LinExpr { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn term(v: VarId, c: f64) -> Self {
        LinExpr { terms: vec![(v, c)], constant: 0.0 }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (VarId, f64)>) -> Self {
        LinExpr { terms: terms.into_iter().collect(), constant: 0.0 }
    }

    pub fn add_term(&mut self, v: VarId, c: f64) -> &mut Self {
        self.terms.push((v, c));
        self
    }

    pub fn with(mut self, v: VarId, c: f64) -> Self {
        self.terms.push((v, c));
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        self.terms.extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += other.constant * scale;
        self
    }

    pub fn terms(&self) -> &[(VarId, f64)] {
        &self.terms
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v.index()]).sum::<f64>() + self.constant
    }

    /// Merges repeated variables and drops zero coefficients; terms end up
    /// sorted by variable.
    pub fn compact(mut self) -> Self {
        if self.terms.len() > 1 {
            self.terms.sort_by_key(|&(v, _)| v);
            let mut out: Vec<(VarId, f64)> = Vec::with_capacity(self.terms.len());
            for (v, c) in self.terms {
                match out.last_mut() {
                    Some(last) if last.0 == v => last.1 += c,
                    _ => out.push((v, c)),
                }
            }
            self.terms = out;
        }
        self.terms.retain(|&(_, c)| c != 0.0);
        self
    }
}

impl From<VarId> for LinExpr {
    fn from(v: VarId) -> Self {
        LinExpr::var(v)
    }
}

impl AddAssign<&LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: &LinExpr) {
        self.add_scaled(rhs, 1.0);
    }
}

impl SubAssign<&LinExpr> for LinExpr {
    fn sub_assign(&mut self, rhs: &LinExpr) {
        self.add_scaled(rhs, -1.0);
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self += &rhs;
        self
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: LinExpr) -> LinExpr {
        self -= &rhs;
        self
    }
}

impl Add<f64> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: f64) -> LinExpr {
        self.constant += rhs;
        self
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(mut self, rhs: f64) -> LinExpr {
        for t in &mut self.terms {
            t.1 *= rhs;
        }
        self.constant *= rhs;
        self
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self * -1.0
    }
}

/// Sparse minimization LP with labelled rows and variables.
///
/// Rows are stored compressed by row; variable order is insertion order, so
/// identical build sequences yield identical models.
#[derive(Clone, Debug, Default)]
pub struct LpModel {
    var_labels: Vec<Label>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    objective: Vec<f64>,
    objective_constant: f64,
    row_labels: Vec<Label>,
    row_start: Vec<usize>,
    cols: Vec<VarId>,
    vals: Vec<f64>,
    senses: Vec<Sense>,
    rhs: Vec<f64>,
}

/// Borrowed view of one row.
#[derive(Clone, Copy, Debug)]
pub struct RowView<'a> {
    pub label: Label,
    pub cols: &'a [VarId],
    pub vals: &'a [f64],
    pub sense: Sense,
    pub rhs: f64,
}

impl RowView<'_> {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.cols.iter().zip(self.vals).map(|(v, c)| c * x[v.index()]).sum()
    }
}

impl LpModel {
    pub fn new() -> Self {
        LpModel { row_start: vec![0], ..Default::default() }
    }

    pub fn num_vars(&self) -> usize {
        self.var_labels.len()
    }

    pub fn num_rows(&self) -> usize {
        self.row_labels.len()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.vals.len()
    }

    pub fn add_var(&mut self, label: Label, lower: f64, upper: f64) -> VarId {
        let id = VarId(u32::try_from(self.var_labels.len()).expect("too many variables"));
        self.var_labels.push(label);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.push(0.0);
        id
    }

    pub fn add_free_var(&mut self, label: Label) -> VarId {
        self.add_var(label, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_nonneg_var(&mut self, label: Label) -> VarId {
        self.add_var(label, 0.0, f64::INFINITY)
    }

    /// Adds `expr (sense) rhs`; the constant part of `expr` is moved to the
    /// right-hand side.
    pub fn add_row(&mut self, label: Label, expr: LinExpr, sense: Sense, rhs: f64) -> RowId {
        let expr = expr.compact();
        let id = RowId(u32::try_from(self.row_labels.len()).expect("too many rows"));
        self.row_labels.push(label);
        for &(v, c) in expr.terms() {
            self.cols.push(v);
            self.vals.push(c);
        }
        self.row_start.push(self.cols.len());
        self.senses.push(sense);
        self.rhs.push(rhs - expr.constant_part());
        id
    }

    /// Introduces a variable equal to the linear part of `expr` (one defining
    /// row) and returns the equivalent short expression `y + constant`.
    /// Expressions with at most one term are returned unchanged.
    pub fn materialize(&mut self, var_label: Label, row_label: Label, expr: &LinExpr) -> LinExpr {
        let compact = expr.clone().compact();
        if compact.terms().len() <= 1 {
            return compact;
        }
        let y = self.add_free_var(var_label);
        let mut def = LinExpr::from_terms(compact.terms().iter().copied());
        def.add_term(y, -1.0);
        self.add_row(row_label, def, Sense::Eq, 0.0);
        LinExpr::var(y) + compact.constant_part()
    }

    pub fn set_bounds(&mut self, v: VarId, lower: f64, upper: f64) {
        self.lower[v.index()] = lower;
        self.upper[v.index()] = upper;
    }

    pub fn fix(&mut self, v: VarId, value: f64) {
        self.set_bounds(v, value, value);
    }

    pub fn bounds(&self, v: VarId) -> (f64, f64) {
        (self.lower[v.index()], self.upper[v.index()])
    }

    pub fn var_label(&self, v: VarId) -> Label {
        self.var_labels[v.index()]
    }

    /// Replaces the objective with `expr` (minimized).
    pub fn set_objective(&mut self, expr: &LinExpr) {
        self.objective.iter_mut().for_each(|c| *c = 0.0);
        self.objective_constant = 0.0;
        self.add_objective(expr);
    }

    pub fn add_objective(&mut self, expr: &LinExpr) {
        for &(v, c) in expr.terms() {
            self.objective[v.index()] += c;
        }
        self.objective_constant += expr.constant_part();
    }

    pub fn objective_coefficients(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + self.objective_constant
    }

    pub fn row(&self, r: RowId) -> RowView<'_> {
        let i = r.index();
        let (a, b) = (self.row_start[i], self.row_start[i + 1]);
        RowView {
            label: self.row_labels[i],
            cols: &self.cols[a..b],
            vals: &self.vals[a..b],
            sense: self.senses[i],
            rhs: self.rhs[i],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = RowView<'_>> + '_ {
        (0..self.num_rows()).map(|i| self.row(RowId(i as u32)))
    }

    pub fn var_labels(&self) -> &[Label] {
        &self.var_labels
    }

    pub fn count_rows(&self, kind: &str) -> usize {
        self.row_labels.iter().filter(|l| l.kind == kind).count()
    }

    pub fn count_vars(&self, kind: &str) -> usize {
        self.var_labels.iter().filter(|l| l.kind == kind).count()
    }

    /// Largest scaled violation of any bound or row at `x`.
    ///
    /// A row's raw violation is divided by `1 + max(|rhs|, max_i |a_i x_i|)`,
    /// a bound's by `1 + |bound|`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for (i, &xi) in x.iter().enumerate() {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if xi < lo {
                worst = worst.max((lo - xi) / (1.0 + lo.abs()));
            }
            if xi > hi {
                worst = worst.max((xi - hi) / (1.0 + hi.abs()));
            }
        }
        for row in self.rows() {
            let mut act = 0.0;
            let mut scale = row.rhs.abs();
            for (v, c) in row.cols.iter().zip(row.vals) {
                let t = c * x[v.index()];
                act += t;
                scale = scale.max(t.abs());
            }
            let raw = match row.sense {
                Sense::Le => act - row.rhs,
                Sense::Ge => row.rhs - act,
                Sense::Eq => (act - row.rhs).abs(),
            };
            if raw > 0.0 {
                worst = worst.max(raw / (1.0 + scale));
            }
        }
        worst
    }

    /// Checks structural well-formedness: valid references, finite data,
    /// consistent bounds and unique labels.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        for (i, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::InvalidModel(format!(
                    "variable {} has bounds [{lo}, {hi}]",
                    self.var_labels[i]
                )));
            }
        }
        if let Some(i) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "objective coefficient of {} is not finite",
                self.var_labels[i]
            )));
        }
        for row in self.rows() {
            if !row.rhs.is_finite() {
                return Err(Error::InvalidModel(format!("row {} has rhs {}", row.label, row.rhs)));
            }
            for (v, c) in row.cols.iter().zip(row.vals) {
                if v.index() >= n {
                    return Err(Error::InvalidModel(format!(
                        "row {} references unknown variable {}",
                        row.label,
                        v.index()
                    )));
                }
                if !c.is_finite() {
                    return Err(Error::InvalidModel(format!(
                        "row {} has coefficient {c} on {}",
                        row.label,
                        self.var_labels[v.index()]
                    )));
                }
            }
        }
        let mut seen = HashSet::with_capacity(self.num_rows());
        for l in &self.row_labels {
            if !seen.insert(*l) {
                return Err(Error::InvalidModel(format!("duplicate row label {l}")));
            }
        }
        let mut seen = HashSet::with_capacity(n);
        for l in &self.var_labels {
            if !seen.insert(*l) {
                return Err(Error::InvalidModel(format!("duplicate variable label {l}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_merges_and_drops_zeros() {
        let mut m = LpModel::new();
        let x = m.add_free_var(Label::new("x"));
        let y = m.add_free_var(Label::new("y"));
        let e = LinExpr::from_terms([(y, 1.0), (x, 2.0), (y, -1.0), (x, 0.5)]).compact();
        assert_eq!(e.terms(), &[(x, 2.5)]);
    }

    #[test]
    fn row_constant_moves_to_rhs() {
        let mut m = LpModel::new();
        let x = m.add_free_var(Label::new("x"));
        let r = m.add_row(Label::new("r"), LinExpr::var(x) + 2.0, Sense::Le, 5.0);
        assert_eq!(m.row(r).rhs, 3.0);
    }

    #[test]
    fn duplicate_labels_are_rejected() {
        let mut m = LpModel::new();
        let x = m.add_free_var(Label::at("x", 0));
        m.add_row(Label::at("r", 1), LinExpr::var(x), Sense::Ge, 0.0);
        m.add_row(Label::at("r", 1), LinExpr::var(x), Sense::Le, 1.0);
        assert!(matches!(m.validate(), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn nan_coefficient_is_rejected() {
        let mut m = LpModel::new();
        let x = m.add_free_var(Label::new("x"));
        m.add_row(Label::new("r"), LinExpr::term(x, f64::NAN), Sense::Ge, 0.0);
        assert!(m.validate().is_err());
    }

    #[test]
    fn materialize_short_expressions_unchanged() {
        let mut m = LpModel::new();
        let x = m.add_free_var(Label::new("x"));
        let e = m.materialize(Label::new("y"), Label::new("def"), &(LinExpr::term(x, 3.0) + 1.0));
        assert_eq!(m.num_rows(), 0);
        assert_eq!(e.terms(), &[(x, 3.0)]);
    }

    #[test]
    fn label_display() {
        assert_eq!(Label::at3("cvar_link", 1, 2, 3).to_string(), "cvar_link.1.2.3");
        assert_eq!(Label::new("master").to_string(), "master");
    }
}
