//! CPLEX LP-format export and a reader for the same dialect.
//!
//! Every variable gets exactly one line in the `Bounds` section, in model
//! order, so a document read back preserves variable order and writing it
//! again reproduces the same bytes.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::{Mutex, OnceLock};

use super::{Label, LinExpr, LpModel, Sense, VarId};
use crate::error::{Error, Result};

const TERMS_PER_LINE: usize = 8;

fn num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:?}")
    }
}

fn write_terms(out: &mut String, terms: impl Iterator<Item = (String, f64)>) {
    for (n, (name, c)) in terms.enumerate() {
        if n > 0 && n % TERMS_PER_LINE == 0 {
            out.push_str("\n  ");
        }
        let sign = if c.is_sign_negative() { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {name}", num(c.abs()));
    }
}

/// Serializes `model` as an LP-format document.
pub fn write_lp(model: &LpModel) -> String {
    let names: Vec<String> = model.var_labels().iter().map(|l| l.to_string()).collect();
    let mut out = String::new();
    let _ = writeln!(out, "\\ {} variables, {} rows", model.num_vars(), model.num_rows());
    out.push_str("Minimize\n obj:");
    write_terms(
        &mut out,
        model
            .objective_coefficients()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(j, &c)| (names[j].clone(), c)),
    );
    let k = model.objective_constant();
    if k != 0.0 {
        let sign = if k.is_sign_negative() { '-' } else { '+' };
        let _ = write!(out, " {sign} {}", num(k.abs()));
    }
    out.push_str("\nSubject To\n");
    for row in model.rows() {
        let _ = write!(out, " {}:", row.label);
        write_terms(&mut out, row.cols.iter().zip(row.vals).map(|(v, &c)| (names[v.index()].clone(), c)));
        let _ = writeln!(out, " {} {}", row.sense.symbol(), num(row.rhs));
    }
    out.push_str("Bounds\n");
    for (j, name) in names.iter().enumerate() {
        let (lo, hi) = model.bounds(VarId(j as u32));
        let line = match (lo.is_finite(), hi.is_finite()) {
            _ if lo == hi => format!(" {name} = {}", num(lo)),
            (false, false) => format!(" {name} free"),
            (true, false) => format!(" {name} >= {}", num(lo)),
            (false, true) => format!(" -inf <= {name} <= {}", num(hi)),
            (true, true) => format!(" {} <= {name} <= {}", num(lo), num(hi)),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

fn intern(kind: &str) -> &'static str {
    static KINDS: OnceLock<Mutex<HashSet<&'static str>>> = OnceLock::new();
    let mut set = KINDS.get_or_init(Default::default).lock().expect("interner poisoned");
    if let Some(k) = set.get(kind) {
        return k;
    }
    let leaked: &'static str = Box::leak(kind.to_owned().into_boxed_str());
    set.insert(leaked);
    leaked
}

fn parse_label(name: &str) -> Result<Label> {
    let mut parts = name.split('.');
    let kind = intern(parts.next().unwrap_or_default());
    let idx: Vec<usize> = parts
        .map(|p| p.parse::<usize>().map_err(|_| Error::Parse(format!("bad name {name:?}"))))
        .collect::<Result<_>>()?;
    match idx.as_slice() {
        [] => Ok(Label::new(kind)),
        [i] => Ok(Label::at(kind, *i)),
        [i, j] => Ok(Label::at2(kind, *i, *j)),
        [i, j, k] => Ok(Label::at3(kind, *i, *j, *k)),
        _ => Err(Error::Parse(format!("too many indices in {name:?}"))),
    }
}

fn parse_num(tok: &str) -> Result<f64> {
    match tok.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        _ => tok.parse::<f64>().map_err(|_| Error::Parse(format!("expected a number, got {tok:?}"))),
    }
}

/// Parses `sign coef name` triplets (and a bare trailing `sign coef`
/// constant) into an expression.
fn parse_expr(tokens: &[&str], vars: &HashMap<String, VarId>) -> Result<LinExpr> {
    let mut expr = LinExpr::new();
    let mut i = 0;
    while i < tokens.len() {
        let sign = match tokens[i] {
            "+" => 1.0,
            "-" => -1.0,
            t => return Err(Error::Parse(format!("expected a sign, got {t:?}"))),
        };
        let c = parse_num(tokens.get(i + 1).ok_or_else(|| Error::Parse("dangling sign".into()))?)?;
        match tokens.get(i + 2) {
            Some(&name) if name != "+" && name != "-" => {
                let v = *vars.get(name).ok_or_else(|| Error::Parse(format!("unknown variable {name:?}")))?;
                expr.add_term(v, sign * c);
                i += 3;
            }
            _ => {
                expr.add_constant(sign * c);
                i += 2;
            }
        }
    }
    Ok(expr)
}

/// Reads a document produced by [`write_lp`].
pub fn read_lp(text: &str) -> Result<LpModel> {
    #[derive(PartialEq)]
    enum Section {
        Preamble,
        Objective,
        Rows,
        Bounds,
        Done,
    }
    let mut section = Section::Preamble;
    let (mut obj, mut rows, mut bounds) = (Vec::new(), Vec::new(), Vec::new());
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('\\') {
            continue;
        }
        match trimmed.to_ascii_lowercase().as_str() {
            "minimize" => section = Section::Objective,
            "subject to" => section = Section::Rows,
            "bounds" => section = Section::Bounds,
            "end" => section = Section::Done,
            _ => match section {
                Section::Objective => obj.extend(trimmed.split_whitespace()),
                Section::Rows => {
                    // A new row starts with `name:`; other lines continue it.
                    let toks: Vec<&str> = trimmed.split_whitespace().collect();
                    if toks[0].ends_with(':') {
                        rows.push(toks);
                    } else {
                        rows.last_mut()
                            .ok_or_else(|| Error::Parse("continuation before first row".into()))?
                            .extend(toks);
                    }
                }
                Section::Bounds => bounds.push(trimmed.split_whitespace().collect::<Vec<_>>()),
                Section::Preamble | Section::Done => {
                    return Err(Error::Parse(format!("unexpected line {trimmed:?}")));
                }
            },
        }
    }
    if section != Section::Done {
        return Err(Error::Parse("missing End".into()));
    }

    let mut model = LpModel::new();
    let mut vars = HashMap::new();
    for b in &bounds {
        let (name, lo, hi) = match b.as_slice() {
            [name, "free"] => (*name, f64::NEG_INFINITY, f64::INFINITY),
            [name, "=", v] => (*name, parse_num(v)?, parse_num(v)?),
            [name, ">=", v] => (*name, parse_num(v)?, f64::INFINITY),
            [name, "<=", v] => (*name, 0.0, parse_num(v)?),
            [lo, "<=", name, "<=", hi] => (*name, parse_num(lo)?, parse_num(hi)?),
            _ => return Err(Error::Parse(format!("bad bound line {:?}", b.join(" ")))),
        };
        if vars.contains_key(name) {
            return Err(Error::Parse(format!("variable {name:?} bounded twice")));
        }
        let v = model.add_var(parse_label(name)?, lo, hi);
        vars.insert(name.to_string(), v);
    }

    let obj_tokens = match obj.first() {
        Some(t) if t.ends_with(':') => &obj[1..],
        _ => &obj[..],
    };
    model.set_objective(&parse_expr(obj_tokens, &vars)?);

    for toks in &rows {
        let name = toks[0].trim_end_matches(':');
        let pos = toks
            .iter()
            .position(|t| matches!(*t, "<=" | ">=" | "=" | "=<" | "=>"))
            .ok_or_else(|| Error::Parse(format!("row {name} has no sense")))?;
        let sense = match toks[pos] {
            "<=" | "=<" => Sense::Le,
            ">=" | "=>" => Sense::Ge,
            _ => Sense::Eq,
        };
        let rhs = parse_num(toks.get(pos + 1).ok_or_else(|| Error::Parse(format!("row {name} has no rhs")))?)?;
        let expr = parse_expr(&toks[1..pos], &vars)?;
        model.add_row(parse_label(name)?, expr, sense, rhs);
    }
    Ok(model)
}
