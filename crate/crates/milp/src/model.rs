//! Model representation: variables, linear expressions, constraints.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::ModelError;

/// Handle to a variable. Only meaningful for the model that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub(crate) usize);

impl VarId {
    /// Dense zero-based position of the variable in its model.
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

impl Variable {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Variable { name: name.into(), lower, upper, kind: VarKind::Continuous }
    }

    /// Continuous variable bounded below by zero.
    pub fn nonneg(name: impl Into<String>) -> Self {
        Self::continuous(name, 0.0, f64::INFINITY)
    }

    pub fn free(name: impl Into<String>) -> Self {
        Self::continuous(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Variable { name: name.into(), lower: 0.0, upper: 1.0, kind: VarKind::Binary }
    }

    pub fn is_binary(&self) -> bool {
        self.kind == VarKind::Binary
    }

    fn validate(&self) -> Result<(), ModelError> {
        let bad = |reason: &str| ModelError::MalformedVariable {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if self.lower.is_nan() || self.upper.is_nan() {
            return Err(bad("NaN bound"));
        }
        if self.lower == f64::INFINITY || self.upper == f64::NEG_INFINITY {
            return Err(bad("bound on the wrong side of infinity"));
        }
        if self.lower > self.upper {
            return Err(bad(&format!("lower bound {} exceeds upper bound {}", self.lower, self.upper)));
        }
        if self.kind == VarKind::Binary && (self.lower < 0.0 || self.upper > 1.0) {
            return Err(bad("binary bounds must lie within [0, 1]"));
        }
        Ok(())
    }
}

/// `sum(coef * var) + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinearExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        LinearExpr { terms: Vec::new(), constant: value }
    }

    pub fn term(mut self, var: VarId, coef: f64) -> Self {
        self.terms.push((var, coef));
        self
    }

    pub fn add_term(&mut self, var: VarId, coef: f64) {
        self.terms.push((var, coef));
    }

    pub fn add_expr(&mut self, other: &LinearExpr, scale: f64) {
        self.terms.extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += other.constant * scale;
    }

    /// Merges duplicate variables, drops zero coefficients and sorts by variable.
    pub fn normalized(&self) -> LinearExpr {
        let mut merged: BTreeMap<VarId, f64> = BTreeMap::new();
        for &(v, c) in &self.terms {
            *merged.entry(v).or_insert(0.0) += c;
        }
        LinearExpr {
            terms: merged.into_iter().filter(|&(_, c)| c != 0.0).collect(),
            constant: self.constant,
        }
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>() + self.constant
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

impl From<VarId> for LinearExpr {
    fn from(v: VarId) -> Self {
        LinearExpr::new().term(v, 1.0)
    }
}

impl AddAssign<&LinearExpr> for LinearExpr {
    fn add_assign(&mut self, rhs: &LinearExpr) {
        self.add_expr(rhs, 1.0);
    }
}

impl SubAssign<&LinearExpr> for LinearExpr {
    fn sub_assign(&mut self, rhs: &LinearExpr) {
        self.add_expr(rhs, -1.0);
    }
}

impl Add for LinearExpr {
    type Output = LinearExpr;
    fn add(mut self, rhs: LinearExpr) -> LinearExpr {
        self += &rhs;
        self
    }
}

impl Sub for LinearExpr {
    type Output = LinearExpr;
    fn sub(mut self, rhs: LinearExpr) -> LinearExpr {
        self -= &rhs;
        self
    }
}

impl Mul<f64> for LinearExpr {
    type Output = LinearExpr;
    fn mul(mut self, k: f64) -> LinearExpr {
        for t in &mut self.terms {
            t.1 *= k;
        }
        self.constant *= k;
        self
    }
}

impl Neg for LinearExpr {
    type Output = LinearExpr;
    fn neg(self) -> LinearExpr {
        self * -1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Maximize,
    Minimize,
}

/// `expr (sense) rhs`; the expression constant is folded into `rhs` on insertion.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub expr: LinearExpr,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.expr.evaluate(values)
    }

    /// Amount by which `values` violates this constraint (zero when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: LinearExpr,
    direction: Direction,
}

impl MilpModel {
    pub fn new(direction: Direction) -> Self {
        MilpModel {
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: LinearExpr::new(),
            direction,
        }
    }

    pub fn add_variable(&mut self, var: Variable) -> Result<VarId, ModelError> {
        var.validate()?;
        self.variables.push(var);
        Ok(VarId(self.variables.len() - 1))
    }

    /// Adds `expr (sense) rhs`. Duplicate terms are merged.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        expr: LinearExpr,
        sense: Sense,
        rhs: f64,
    ) -> Result<usize, ModelError> {
        let name = name.into();
        self.check_expr(&expr, &name)?;
        if !rhs.is_finite() {
            return Err(ModelError::NonFinite { context: name });
        }
        let mut expr = expr.normalized();
        let rhs = rhs - expr.constant;
        expr.constant = 0.0;
        self.constraints.push(Constraint { name, expr, sense, rhs });
        Ok(self.constraints.len() - 1)
    }

    pub fn set_objective(&mut self, objective: LinearExpr) -> Result<(), ModelError> {
        self.check_expr(&objective, "objective")?;
        self.objective = objective.normalized();
        Ok(())
    }

    pub fn set_direction(&mut self, direction: Direction) {
        self.direction = direction;
    }

    /// Replaces the bounds of an existing variable.
    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) -> Result<(), ModelError> {
        let v = self.variables.get(var.0).ok_or(ModelError::UnknownVariable { index: var.0 })?;
        let updated = Variable { lower, upper, ..v.clone() };
        updated.validate()?;
        self.variables[var.0] = updated;
        Ok(())
    }

    /// Changes the kind of an existing variable together with its bounds.
    pub fn set_kind(&mut self, var: VarId, kind: VarKind, lower: f64, upper: f64) -> Result<(), ModelError> {
        let v = self.variables.get(var.0).ok_or(ModelError::UnknownVariable { index: var.0 })?;
        let updated = Variable { lower, upper, kind, ..v.clone() };
        updated.validate()?;
        self.variables[var.0] = updated;
        Ok(())
    }

    fn check_expr(&self, expr: &LinearExpr, context: &str) -> Result<(), ModelError> {
        if !expr.constant.is_finite() {
            return Err(ModelError::NonFinite { context: context.to_string() });
        }
        for &(v, c) in &expr.terms {
            if v.0 >= self.variables.len() {
                return Err(ModelError::UnknownVariable { index: v.0 });
            }
            if !c.is_finite() {
                return Err(ModelError::NonFinite { context: context.to_string() });
            }
        }
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, var: VarId) -> &Variable {
        &self.variables[var.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &LinearExpr {
        &self.objective
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.is_binary()).count()
    }

    pub fn var_ids(&self) -> impl Iterator<Item = VarId> {
        (0..self.variables.len()).map(VarId)
    }

    /// Largest bound or constraint violation of `values` (absolute).
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let bounds = self
            .variables
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0));
        let rows = self.constraints.iter().map(|c| c.violation(values));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    /// Largest distance of a binary variable from {0, 1}.
    pub fn max_integrality_violation(&self, values: &[f64]) -> f64 {
        self.variables
            .iter()
            .zip(values)
            .filter(|(v, _)| v.is_binary())
            .map(|(_, &x)| (x - x.round()).abs())
            .fold(0.0, f64::max)
    }
}
