//! CPLEX LP text format.

use std::collections::{HashMap, HashSet};
use std::fmt::Write;

use crate::error::LpParseError;
use crate::model::{Direction, LinearExpr, MilpModel, Sense, VarId, VarKind, Variable};

const TERMS_PER_LINE: usize = 6;
const KEYWORDS: &[&str] = &[
    "max", "maximize", "maximum", "min", "minimize", "minimum", "st", "s.t.", "subject", "such",
    "bounds", "bound", "binaries", "binary", "bin", "general", "generals", "gen", "free", "inf",
    "infinity", "end", "sos", "semi",
];

/// Maps names onto `[A-Za-z0-9_]`, avoiding keywords, leading digits and the
/// exponent-like leading `e`.
fn sanitize(raw: &str) -> String {
    let mut s: String = raw.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    let needs_prefix = match s.chars().next() {
        None => true,
        Some(c) => !c.is_ascii_alphabetic() || c == 'e' || c == 'E',
    } || KEYWORDS.contains(&s.to_ascii_lowercase().as_str());
    if needs_prefix {
        s.insert_str(0, "n_");
    }
    s
}

fn unique_names<'a>(raw: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = HashSet::new();
    raw.map(|r| {
        let base = sanitize(r);
        let mut name = base.clone();
        let mut k = 2;
        while !seen.insert(name.clone()) {
            name = format!("{base}_{k}");
            k += 1;
        }
        name
    })
    .collect()
}

fn write_terms(out: &mut String, expr: &LinearExpr, names: &[String]) {
    for (k, &(v, c)) in expr.terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {:?} {}", c.abs(), names[v.index()]);
    }
}

fn fmt_bound(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v:?}")
    }
}

/// Writes the model as CPLEX LP text. Every variable appears in `Bounds`, in
/// model order, so the text re-parses to the same variable table.
pub fn export_lp_file(model: &MilpModel) -> String {
    let var_names = unique_names(model.variables().iter().map(|v| v.name.as_str()));
    let row_names = unique_names(model.constraints().iter().map(|c| c.name.as_str()));
    let mut out = String::new();
    out.push_str(match model.direction() {
        Direction::Maximize => "Maximize\n",
        Direction::Minimize => "Minimize\n",
    });
    out.push_str(" obj:");
    let objective = model.objective();
    if objective.terms.is_empty() && !var_names.is_empty() {
        let _ = write!(out, " + 0.0 {}", var_names[0]);
    }
    write_terms(&mut out, objective, &var_names);
    if objective.constant != 0.0 {
        let sign = if objective.constant < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {:?}", objective.constant.abs());
    }
    out.push_str("\nSubject To\n");
    for (c, name) in model.constraints().iter().zip(&row_names) {
        let _ = write!(out, " {name}:");
        if c.expr.terms.is_empty() {
            if let Some(first) = var_names.first() {
                let _ = write!(out, " + 0.0 {first}");
            }
        }
        write_terms(&mut out, &c.expr, &var_names);
        let _ = writeln!(out, " {} {:?}", c.sense.symbol(), c.rhs);
    }
    out.push_str("Bounds\n");
    for (v, name) in model.variables().iter().zip(&var_names) {
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {name} free");
        } else {
            let _ = writeln!(out, " {} <= {name} <= {}", fmt_bound(v.lower), fmt_bound(v.upper));
        }
    }
    let binaries: Vec<&String> = model
        .variables()
        .iter()
        .zip(&var_names)
        .filter(|(v, _)| v.is_binary())
        .map(|(_, n)| n)
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for name in binaries {
            let _ = writeln!(out, " {name}");
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    End,
}

fn section_header(line: &str) -> Option<(Section, Option<Direction>)> {
    match line.to_ascii_lowercase().as_str() {
        "maximize" | "maximise" | "maximum" | "max" => Some((Section::Objective, Some(Direction::Maximize))),
        "minimize" | "minimise" | "minimum" | "min" => Some((Section::Objective, Some(Direction::Minimize))),
        "subject to" | "such that" | "st" | "s.t." => Some((Section::Constraints, None)),
        "bounds" | "bound" => Some((Section::Bounds, None)),
        "binaries" | "binary" | "bin" => Some((Section::Binaries, None)),
        "end" => Some((Section::End, None)),
        _ => None,
    }
}

#[derive(Default)]
struct NameTable {
    ids: HashMap<String, VarId>,
}

impl NameTable {
    fn declare(&mut self, model: &mut MilpModel, name: &str, lower: f64, upper: f64) -> Result<VarId, LpParseError> {
        if let Some(&id) = self.ids.get(name) {
            model.set_bounds(id, lower, upper)?;
            return Ok(id);
        }
        let id = model.add_variable(Variable::continuous(name, lower, upper))?;
        self.ids.insert(name.to_string(), id);
        Ok(id)
    }

    fn resolve(&mut self, model: &mut MilpModel, terms: Vec<(String, f64)>) -> Result<LinearExpr, LpParseError> {
        let mut expr = LinearExpr::new();
        for (name, c) in terms {
            let id = match self.ids.get(&name) {
                Some(&id) => id,
                None => self.declare(model, &name, 0.0, f64::INFINITY)?,
            };
            expr.add_term(id, c);
        }
        Ok(expr)
    }
}

struct Statement {
    line: usize,
    name: String,
    tokens: Vec<String>,
}

fn syntax(line: usize, message: impl Into<String>) -> LpParseError {
    LpParseError::Syntax { line, message: message.into() }
}

fn parse_number(tok: &str) -> Option<f64> {
    let first = tok.chars().next()?;
    if first.is_ascii_digit() || first == '.' || first == '-' || first == '+' || tok.eq_ignore_ascii_case("inf") {
        tok.parse::<f64>().ok()
    } else {
        None
    }
}

/// Parsed linear terms by name plus a constant.
fn parse_terms(tokens: &[String], line: usize) -> Result<(Vec<(String, f64)>, f64), LpParseError> {
    let mut terms = Vec::new();
    let mut constant = 0.0;
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for tok in tokens {
        match tok.as_str() {
            "+" => {
                if let Some(c) = coef.take() {
                    constant += sign * c;
                }
                sign = 1.0;
            }
            "-" => {
                if let Some(c) = coef.take() {
                    constant += sign * c;
                }
                sign = -1.0;
            }
            t => {
                if let Some(num) = parse_number(t) {
                    if coef.is_some() {
                        return Err(syntax(line, format!("two numbers in a row at `{t}`")));
                    }
                    coef = Some(num);
                } else {
                    terms.push((t.to_string(), sign * coef.take().unwrap_or(1.0)));
                    sign = 1.0;
                }
            }
        }
    }
    if let Some(c) = coef {
        constant += sign * c;
    }
    Ok((terms, constant))
}

/// Reads LP text in the subset written by [`export_lp_file`].
pub fn parse_lp_file(text: &str) -> Result<MilpModel, LpParseError> {
    let mut section = Section::Preamble;
    let mut direction = Direction::Minimize;
    let mut objective: Option<Statement> = None;
    let mut rows: Vec<Statement> = Vec::new();
    let mut bounds: Vec<(usize, Vec<String>)> = Vec::new();
    let mut binaries: Vec<String> = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some((s, dir)) = section_header(line) {
            section = s;
            if let Some(d) = dir {
                direction = d;
            }
            continue;
        }
        match section {
            Section::Preamble | Section::End => {
                return Err(syntax(line_no, "content outside of a section"));
            }
            Section::Objective | Section::Constraints => {
                let (name, body) = match line.split_once(':') {
                    Some((n, b)) => (Some(n.trim().to_string()), b),
                    None => (None, line),
                };
                let tokens = body.split_whitespace().map(str::to_string);
                if section == Section::Objective {
                    match (objective.as_mut(), name) {
                        (Some(st), None) => st.tokens.extend(tokens),
                        (None, n) => {
                            objective = Some(Statement { line: line_no, name: n.unwrap_or_default(), tokens: tokens.collect() })
                        }
                        (Some(_), Some(_)) => return Err(syntax(line_no, "second objective")),
                    }
                } else {
                    match (name, rows.last_mut()) {
                        (Some(n), _) => rows.push(Statement { line: line_no, name: n, tokens: tokens.collect() }),
                        (None, Some(st)) => st.tokens.extend(tokens),
                        (None, None) => return Err(syntax(line_no, "constraint without a name")),
                    }
                }
            }
            Section::Bounds => bounds.push((line_no, line.split_whitespace().map(str::to_string).collect())),
            Section::Binaries => binaries.extend(line.split_whitespace().map(str::to_string)),
        }
    }

    let mut model = MilpModel::new(direction);
    let mut table = NameTable::default();
    for (line, toks) in &bounds {
        let t: Vec<&str> = toks.iter().map(String::as_str).collect();
        let num = |s: &str| parse_number(s).ok_or_else(|| syntax(*line, format!("bad number `{s}`")));
        match t.as_slice() {
            [name, free] if free.eq_ignore_ascii_case("free") => {
                table.declare(&mut model, name, f64::NEG_INFINITY, f64::INFINITY)?;
            }
            [lo, "<=", name, "<=", up] => {
                table.declare(&mut model, name, num(lo)?, num(up)?)?;
            }
            [name, ">=", lo] => {
                table.declare(&mut model, name, num(lo)?, f64::INFINITY)?;
            }
            [name, "<=", up] => {
                table.declare(&mut model, name, 0.0, num(up)?)?;
            }
            [name, "=", v] => {
                let v = num(v)?;
                table.declare(&mut model, name, v, v)?;
            }
            _ => return Err(syntax(*line, "unrecognised bound")),
        }
    }

    if let Some(st) = objective {
        let (terms, constant) = parse_terms(&st.tokens, st.line)?;
        let mut expr = table.resolve(&mut model, terms)?;
        expr.constant = constant;
        model.set_objective(expr)?;
    }
    for st in rows {
        let op = st
            .tokens
            .iter()
            .position(|t| matches!(t.as_str(), "<=" | ">=" | "=" | "=<" | "=>" | "<" | ">"))
            .ok_or_else(|| syntax(st.line, "constraint without a comparison"))?;
        let sense = match st.tokens[op].as_str() {
            "<=" | "=<" | "<" => Sense::Le,
            ">=" | "=>" | ">" => Sense::Ge,
            _ => Sense::Eq,
        };
        let (terms, lhs_const) = parse_terms(&st.tokens[..op], st.line)?;
        let (rhs_terms, rhs) = parse_terms(&st.tokens[op + 1..], st.line)?;
        if !rhs_terms.is_empty() {
            return Err(syntax(st.line, "variables on the right-hand side"));
        }
        let expr = table.resolve(&mut model, terms)?;
        model.add_constraint(st.name, expr, sense, rhs - lhs_const)?;
    }
    for name in binaries {
        let id = match table.ids.get(&name) {
            Some(&id) => id,
            None => return Err(syntax(0, format!("binary `{name}` never declared"))),
        };
        let v = model.variable(id);
        let (lower, upper) = (v.lower.max(0.0), v.upper.min(1.0));
        model.set_kind(id, VarKind::Binary, lower, upper)?;
    }
    Ok(model)
}
