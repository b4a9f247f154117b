//! Bounded-variable revised simplex.
//!
//! Internally every model is `min c x` subject to `A x - r = 0` with bounds on
//! both the structural variables `x` and one logical variable `r` per row.
//! Nonbasic variables sit at a bound (or at zero when free), so variable bounds
//! never appear as rows.
//!
//! The primal method runs a composite phase 1 (sum of basic infeasibilities)
//! followed by phase 2, Dantzig pricing with lowest-index ties, and switches to
//! Bland's rule after a long run of degenerate pivots. The dual method is used
//! to reoptimize after bound changes in branch and bound.

use crate::lu::BasisFactor;
use crate::model::{Direction, MilpModel, Sense};

const NONE: usize = usize::MAX;
pub(crate) const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
/// Relative objective change below which a pivot counts as degenerate.
const STALL_TOL: f64 = 1e-11;
/// Relative size of the bound perturbation against primal degeneracy.
const PERTURBATION: f64 = 1e-6;
/// Consecutive degenerate pivots before the bounds are perturbed.
const PERTURB_AFTER: usize = 20;
/// Consecutive degenerate pivots tolerated before Bland's rule takes over.
pub(crate) const BLAND_AFTER: usize = 1000;

fn ptol(bound: f64) -> f64 {
    if bound.is_finite() {
        PRIMAL_TOL * bound.abs().max(1.0)
    } else {
        PRIMAL_TOL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VarState {
    Basic,
    Lower,
    Upper,
    Free,
}

/// `min c x  s.t.  A x - r = 0,  lower <= (x, r) <= upper`.
#[derive(Debug, Clone)]
pub(crate) struct StandardForm {
    pub n: usize,
    pub m: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `+1` when the model minimizes, `-1` when it maximizes.
    pub obj_sign: f64,
    pub obj_constant: f64,
}

impl StandardForm {
    pub fn from_model(model: &MilpModel) -> Self {
        let n = model.num_variables();
        let m = model.constraints().len();
        let mut counts = vec![0usize; n + 1];
        for c in model.constraints() {
            for &(v, _) in &c.expr.terms {
                counts[v.index() + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let mut fill = counts;
        let nnz = col_start[n];
        let mut col_row = vec![0; nnz];
        let mut col_val = vec![0.0; nnz];
        for (i, c) in model.constraints().iter().enumerate() {
            for &(v, a) in &c.expr.terms {
                let slot = fill[v.index()];
                col_row[slot] = i;
                col_val[slot] = a;
                fill[v.index()] += 1;
            }
        }

        let obj_sign = match model.direction() {
            Direction::Minimize => 1.0,
            Direction::Maximize => -1.0,
        };
        let mut cost = vec![0.0; n];
        for &(v, c) in &model.objective().terms {
            cost[v.index()] += obj_sign * c;
        }
        let mut lower: Vec<f64> = model.variables().iter().map(|v| v.lower).collect();
        let mut upper: Vec<f64> = model.variables().iter().map(|v| v.upper).collect();
        for c in model.constraints() {
            let (l, u) = match c.sense {
                Sense::Le => (f64::NEG_INFINITY, c.rhs),
                Sense::Ge => (c.rhs, f64::INFINITY),
                Sense::Eq => (c.rhs, c.rhs),
            };
            lower.push(l);
            upper.push(u);
        }
        StandardForm {
            n,
            m,
            col_start,
            col_row,
            col_val,
            cost,
            lower,
            upper,
            obj_sign,
            obj_constant: model.objective().constant,
        }
    }

    fn cost_of(&self, j: usize) -> f64 {
        if j < self.n {
            self.cost[j]
        } else {
            0.0
        }
    }

    fn column_into(&self, j: usize, buf: &mut Vec<(usize, f64)>) {
        if j < self.n {
            for t in self.col_start[j]..self.col_start[j + 1] {
                buf.push((self.col_row[t], self.col_val[t]));
            }
        } else {
            buf.push((j - self.n, -1.0));
        }
    }

    fn scatter_column(&self, j: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if j < self.n {
            for t in self.col_start[j]..self.col_start[j + 1] {
                out[self.col_row[t]] += self.col_val[t];
            }
        } else {
            out[j - self.n] = -1.0;
        }
    }

    /// `y . column_j`
    fn dot(&self, y: &[f64], j: usize) -> f64 {
        if j < self.n {
            let mut s = 0.0;
            for t in self.col_start[j]..self.col_start[j + 1] {
                s += y[self.col_row[t]] * self.col_val[t];
            }
            s
        } else {
            -y[j - self.n]
        }
    }
}

/// Basis and nonbasic positions, enough to restart the simplex elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Snapshot {
    state: Vec<VarState>,
    basis: Vec<usize>,
}

impl Snapshot {
    /// Carries a basis over to `m >= rows` rows over the same `n` columns; the
    /// logicals of the added rows enter the basis.
    pub fn extended(&self, n: usize, m: usize) -> Option<Snapshot> {
        let rows = self.basis.len();
        if self.state.len() != n + rows || m < rows {
            return None;
        }
        let mut state = self.state.clone();
        state.resize(n + m, VarState::Basic);
        let mut basis = self.basis.clone();
        basis.extend(n + rows..n + m);
        Some(Snapshot { state, basis })
    }
}

pub(crate) struct Simplex<'a> {
    sf: &'a StandardForm,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    factor: BasisFactor,
    fresh: bool,
    pub iterations: usize,
    pub iteration_limit: usize,
    row_buf: Vec<f64>,
    col_buf: Vec<f64>,
    /// Unperturbed bounds while a bound perturbation is active.
    saved_bounds: Option<(Vec<f64>, Vec<f64>)>,
    perturbed: Vec<bool>,
    rng: u64,
}

impl<'a> Simplex<'a> {
    /// Starts from the all-logical basis.
    pub fn new(sf: &'a StandardForm, iteration_limit: usize) -> Self {
        let total = sf.n + sf.m;
        let mut s = Simplex {
            sf,
            lower: sf.lower.clone(),
            upper: sf.upper.clone(),
            x: vec![0.0; total],
            state: vec![VarState::Basic; total],
            basis: (sf.n..total).collect(),
            factor: BasisFactor::default(),
            fresh: false,
            iterations: 0,
            iteration_limit,
            row_buf: vec![0.0; sf.m],
            col_buf: vec![0.0; sf.m],
            saved_bounds: None,
            perturbed: vec![false; total],
            rng: 0x9E37_79B9_7F4A_7C15,
        };
        for j in 0..sf.n {
            s.state[j] = s.default_nonbasic_state(j);
            s.x[j] = s.nonbasic_value(j);
        }
        s.refactor();
        s
    }

    fn default_nonbasic_state(&self, j: usize) -> VarState {
        if self.lower[j].is_finite() {
            VarState::Lower
        } else if self.upper[j].is_finite() {
            VarState::Upper
        } else {
            VarState::Free
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Lower => self.lower[j],
            VarState::Upper => self.upper[j],
            VarState::Free => 0.0,
            VarState::Basic => self.x[j],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.x[..self.sf.n]
    }

    /// Internal (minimization) objective without the model constant.
    pub fn objective(&self) -> f64 {
        self.sf.cost.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot { state: self.state.clone(), basis: self.basis.clone() }
    }

    pub fn restore(&mut self, snap: &Snapshot) {
        let same_basis = self.basis == snap.basis;
        self.state.clone_from(&snap.state);
        self.basis.clone_from(&snap.basis);
        for j in 0..self.state.len() {
            if self.state[j] != VarState::Basic {
                self.state[j] = self.fit_state(j, self.state[j]);
                self.x[j] = self.nonbasic_value(j);
            }
        }
        if same_basis {
            // The factor still matches; only the basic values need refreshing.
            self.recompute_basic_values();
            self.fresh = false;
        } else {
            self.refactor();
        }
    }

    /// Keeps a nonbasic variable at a finite bound after its bounds moved.
    fn fit_state(&self, j: usize, preferred: VarState) -> VarState {
        match preferred {
            VarState::Upper if self.upper[j].is_finite() => VarState::Upper,
            VarState::Lower if self.lower[j].is_finite() => VarState::Lower,
            _ => self.default_nonbasic_state(j),
        }
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    /// Changes the bounds of structural variable `j`. Basic values are refreshed
    /// lazily by the next solve.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
        if self.state[j] != VarState::Basic {
            self.state[j] = self.fit_state(j, self.state[j]);
            let v = self.nonbasic_value(j);
            if v != self.x[j] {
                self.x[j] = v;
                self.fresh = false;
            }
        }
    }

    fn refactor(&mut self) {
        let m = self.sf.m;
        loop {
            let result = {
                let sf = self.sf;
                let basis = &self.basis;
                BasisFactor::factorize(m, &|p, buf| sf.column_into(basis[p], buf))
            };
            match result {
                Ok(f) => {
                    self.factor = f;
                    break;
                }
                Err(singular) => {
                    for (&pos, &row) in singular.positions.iter().zip(&singular.free_rows) {
                        let old = self.basis[pos];
                        self.state[old] = self.default_nonbasic_state(old);
                        self.x[old] = self.nonbasic_value(old);
                        let logical = self.sf.n + row;
                        self.basis[pos] = logical;
                        self.state[logical] = VarState::Basic;
                    }
                }
            }
        }
        self.recompute_basic_values();
        self.fresh = true;
    }

    fn recompute_basic_values(&mut self) {
        let sf = self.sf;
        let rhs = &mut self.row_buf;
        rhs.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..sf.n + sf.m {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let v = self.x[j];
            if v == 0.0 {
                continue;
            }
            if j < sf.n {
                for t in sf.col_start[j]..sf.col_start[j + 1] {
                    rhs[sf.col_row[t]] -= sf.col_val[t] * v;
                }
            } else {
                rhs[j - sf.n] += v;
            }
        }
        self.factor.ftran(rhs);
        for (p, &j) in self.basis.iter().enumerate() {
            self.x[j] = rhs[p];
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let x = self.x[j];
        if x < self.lower[j] - ptol(self.lower[j]) {
            self.lower[j] - x
        } else if x > self.upper[j] + ptol(self.upper[j]) {
            x - self.upper[j]
        } else {
            0.0
        }
    }

    /// Dual values `y = B^-T c_B` for the given basic costs, stored in `row_buf`.
    fn compute_duals(&mut self, phase1: bool) {
        let y = &mut self.row_buf;
        for (p, &j) in self.basis.iter().enumerate() {
            y[p] = if phase1 {
                let x = self.x[j];
                if x < self.lower[j] - ptol(self.lower[j]) {
                    -1.0
                } else if x > self.upper[j] + ptol(self.upper[j]) {
                    1.0
                } else {
                    0.0
                }
            } else {
                self.sf.cost_of(j)
            };
        }
        self.factor.btran(y);
    }

    fn pivot(&mut self, pos: usize, entering: usize, leaving_state: VarState) {
        let leaving = self.basis[pos];
        self.state[leaving] = leaving_state;
        self.x[leaving] = self.nonbasic_value(leaving);
        self.basis[pos] = entering;
        self.state[entering] = VarState::Basic;
        self.factor.update(pos, &self.col_buf);
        self.fresh = false;
        if self.saved_bounds.is_some() {
            self.perturb(entering);
        }
    }

    fn next_unit(&mut self) -> f64 {
        // xorshift64*
        self.rng ^= self.rng >> 12;
        self.rng ^= self.rng << 25;
        self.rng ^= self.rng >> 27;
        (self.rng.wrapping_mul(0x2545_F491_4F6C_DD1D) >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Widens the bounds of basic variable `j` by a small random amount.
    fn perturb(&mut self, j: usize) {
        if self.perturbed[j] {
            return;
        }
        self.perturbed[j] = true;
        if self.lower[j].is_finite() {
            let r = self.next_unit();
            self.lower[j] -= PERTURBATION * (0.5 + r) * self.lower[j].abs().max(1.0);
        }
        if self.upper[j].is_finite() {
            let r = self.next_unit();
            self.upper[j] += PERTURBATION * (0.5 + r) * self.upper[j].abs().max(1.0);
        }
    }

    fn start_perturbation(&mut self) {
        self.saved_bounds = Some((self.lower.clone(), self.upper.clone()));
        for p in 0..self.sf.m {
            self.perturb(self.basis[p]);
        }
    }

    /// Restores the true bounds and moves nonbasic variables back onto them.
    fn end_perturbation(&mut self) -> bool {
        let Some((lower, upper)) = self.saved_bounds.take() else {
            return false;
        };
        self.lower = lower;
        self.upper = upper;
        self.perturbed.iter_mut().for_each(|p| *p = false);
        for j in 0..self.state.len() {
            if self.state[j] != VarState::Basic {
                self.state[j] = self.fit_state(j, self.state[j]);
                self.x[j] = self.nonbasic_value(j);
            }
        }
        self.refactor();
        true
    }

    /// Primal simplex from the current basis. Long degenerate runs switch on a
    /// bound perturbation, removed again before a final clean-up pass.
    pub fn primal(&mut self) -> LpStatus {
        let status = self.primal_pass(true);
        if self.end_perturbation() {
            return self.primal_pass(false);
        }
        status
    }

    fn primal_pass(&mut self, allow_perturbation: bool) -> LpStatus {
        let total = self.sf.n + self.sf.m;
        let m = self.sf.m;
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let mut stalls = 0usize;
        if !self.fresh {
            self.refactor();
        }
        loop {
            if self.iterations >= self.iteration_limit {
                return LpStatus::IterationLimit;
            }
            if self.factor.needs_refactor() {
                self.refactor();
            }
            let phase1 = self.basis.iter().any(|&j| self.infeasibility(j) > 0.0);
            self.compute_duals(phase1);

            let mut entering = NONE;
            let mut best = 0.0;
            let mut dir = 0.0;
            let mut d_enter = 0.0;
            for j in 0..total {
                let st = self.state[j];
                if st == VarState::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let c = if phase1 { 0.0 } else { self.sf.cost_of(j) };
                let d = c - self.sf.dot(&self.row_buf, j);
                let (eligible, s) = match st {
                    VarState::Lower => (d < -DUAL_TOL, 1.0),
                    VarState::Upper => (d > DUAL_TOL, -1.0),
                    VarState::Free => (d.abs() > DUAL_TOL, -d.signum()),
                    VarState::Basic => unreachable!(),
                };
                if !eligible {
                    continue;
                }
                if bland {
                    entering = j;
                    dir = s;
                    d_enter = d.abs();
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = j;
                    dir = s;
                    d_enter = d.abs();
                }
            }
            if entering == NONE {
                if !self.fresh {
                    self.refactor();
                    continue;
                }
                return if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal };
            }

            self.sf.scatter_column(entering, &mut self.col_buf);
            self.factor.ftran(&mut self.col_buf);

            // Two-pass (Harris) ratio test.
            let mut relaxed = f64::INFINITY;
            for p in 0..m {
                let a = self.col_buf[p];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let j = self.basis[p];
                if let Some((dist, bound)) = self.blocking(j, -dir * a, phase1) {
                    let tol = ptol(if bound == VarState::Lower { self.lower[j] } else { self.upper[j] });
                    relaxed = relaxed.min((dist + tol) / a.abs());
                }
            }
            let mut leave = NONE;
            let mut leave_state = VarState::Lower;
            let mut step = f64::INFINITY;
            let mut best_pivot = 0.0;
            if relaxed.is_finite() {
                for p in 0..m {
                    let a = self.col_buf[p];
                    if a.abs() <= PIVOT_TOL {
                        continue;
                    }
                    let j = self.basis[p];
                    let Some((dist, bound)) = self.blocking(j, -dir * a, phase1) else {
                        continue;
                    };
                    let ratio = dist / a.abs();
                    if ratio > relaxed {
                        continue;
                    }
                    let better = if bland {
                        ratio < step || (ratio == step && j < self.basis[leave])
                    } else {
                        a.abs() > best_pivot
                    };
                    if leave == NONE || better {
                        leave = p;
                        leave_state = bound;
                        step = ratio;
                        best_pivot = a.abs();
                    }
                }
            }

            let range = self.upper[entering] - self.lower[entering];
            let flip = range.is_finite() && (leave == NONE || range <= step);
            if leave == NONE && !flip {
                if phase1 {
                    // Cannot happen in exact arithmetic; rebuild and retry.
                    stalls += 1;
                    if stalls > 5 {
                        return LpStatus::Infeasible;
                    }
                    self.refactor();
                    continue;
                }
                return LpStatus::Unbounded;
            }
            let t = if flip { range } else { step.max(0.0) };

            self.x[entering] += dir * t;
            if t != 0.0 {
                for p in 0..m {
                    let a = self.col_buf[p];
                    if a != 0.0 {
                        self.x[self.basis[p]] -= dir * t * a;
                    }
                }
            }
            if flip {
                self.state[entering] = match self.state[entering] {
                    VarState::Lower => VarState::Upper,
                    _ => VarState::Lower,
                };
                self.x[entering] = self.nonbasic_value(entering);
                self.fresh = false;
            } else {
                self.pivot(leave, entering, leave_state);
            }
            self.iterations += 1;

            // Steps that barely move the objective count as degenerate too.
            let stalled = t <= DEGENERATE_STEP || t * d_enter <= STALL_TOL * (1.0 + self.objective().abs());
            if stalled {
                degenerate_run += 1;
                if allow_perturbation && degenerate_run >= PERTURB_AFTER && self.saved_bounds.is_none() {
                    self.start_perturbation();
                    degenerate_run = 0;
                }
                if degenerate_run >= BLAND_AFTER {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
        }
    }

    /// Distance to the bound at which basic variable `j` blocks a step in which
    /// it changes at rate `delta`.
    fn blocking(&self, j: usize, delta: f64, phase1: bool) -> Option<(f64, VarState)> {
        let x = self.x[j];
        let (l, u) = (self.lower[j], self.upper[j]);
        if phase1 {
            if x < l - ptol(l) {
                return (delta > 0.0).then_some((l - x, VarState::Lower));
            }
            if x > u + ptol(u) {
                return (delta < 0.0).then_some((x - u, VarState::Upper));
            }
        }
        if delta < 0.0 && l.is_finite() {
            Some(((x - l).max(0.0), VarState::Lower))
        } else if delta > 0.0 && u.is_finite() {
            Some(((u - x).max(0.0), VarState::Upper))
        } else {
            None
        }
    }

    /// Dual simplex from a dual feasible basis; finishes with a primal pass.
    pub fn dual(&mut self) -> LpStatus {
        let total = self.sf.n + self.sf.m;
        let m = self.sf.m;
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let mut alpha_row = vec![0.0; total];
        let mut reduced = vec![0.0; total];
        if !self.fresh {
            self.recompute_basic_values();
        }
        loop {
            if self.iterations >= self.iteration_limit {
                return LpStatus::IterationLimit;
            }
            if self.factor.needs_refactor() {
                self.refactor();
            }

            // Leaving row: largest infeasibility.
            let mut leave = NONE;
            let mut worst = 0.0;
            for p in 0..m {
                let j = self.basis[p];
                let inf = self.infeasibility(j);
                if inf <= 0.0 {
                    continue;
                }
                let better = if bland { leave == NONE || j < self.basis[leave] } else { inf > worst };
                if better {
                    worst = inf;
                    leave = p;
                }
            }
            if leave == NONE {
                if !self.fresh {
                    self.refactor();
                    continue;
                }
                return self.primal_pass(false);
            }

            self.compute_duals(false);
            let mut dual_infeasible = false;
            for j in 0..total {
                let st = self.state[j];
                if st == VarState::Basic {
                    continue;
                }
                let d = self.sf.cost_of(j) - self.sf.dot(&self.row_buf, j);
                reduced[j] = d;
                if self.lower[j] == self.upper[j] {
                    continue;
                }
                let wrong = match st {
                    VarState::Lower => d < -1e3 * DUAL_TOL,
                    VarState::Upper => d > 1e3 * DUAL_TOL,
                    VarState::Free => d.abs() > 1e3 * DUAL_TOL,
                    VarState::Basic => false,
                };
                dual_infeasible |= wrong;
            }
            if dual_infeasible {
                return self.primal();
            }

            let leaving = self.basis[leave];
            let to_lower = self.x[leaving] < self.lower[leaving];
            let y = &mut self.row_buf;
            y.iter_mut().for_each(|v| *v = 0.0);
            y[leave] = 1.0;
            self.factor.btran(y);
            for j in 0..total {
                if self.state[j] != VarState::Basic && self.lower[j] != self.upper[j] {
                    alpha_row[j] = self.sf.dot(&self.row_buf, j);
                }
            }

            let eligible = |j: usize, a: f64| -> bool {
                match self.state[j] {
                    VarState::Lower => {
                        if to_lower {
                            a < -PIVOT_TOL
                        } else {
                            a > PIVOT_TOL
                        }
                    }
                    VarState::Upper => {
                        if to_lower {
                            a > PIVOT_TOL
                        } else {
                            a < -PIVOT_TOL
                        }
                    }
                    VarState::Free => a.abs() > PIVOT_TOL,
                    VarState::Basic => false,
                }
            };
            let mut relaxed = f64::INFINITY;
            for j in 0..total {
                if self.state[j] == VarState::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let a = alpha_row[j];
                if eligible(j, a) {
                    relaxed = relaxed.min((reduced[j].abs() + DUAL_TOL) / a.abs());
                }
            }
            if !relaxed.is_finite() {
                if !self.fresh {
                    self.refactor();
                    continue;
                }
                return LpStatus::Infeasible;
            }
            let mut entering = NONE;
            let mut best_pivot = 0.0;
            let mut best_ratio = f64::INFINITY;
            for j in 0..total {
                if self.state[j] == VarState::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let a = alpha_row[j];
                if !eligible(j, a) {
                    continue;
                }
                let ratio = reduced[j].abs() / a.abs();
                if ratio > relaxed {
                    continue;
                }
                let better = if bland { ratio < best_ratio } else { a.abs() > best_pivot };
                if entering == NONE || better {
                    entering = j;
                    best_pivot = a.abs();
                    best_ratio = ratio;
                }
            }

            self.sf.scatter_column(entering, &mut self.col_buf);
            self.factor.ftran(&mut self.col_buf);
            let a_r = self.col_buf[leave];
            let a_row = alpha_row[entering];
            if (a_r - a_row).abs() > 1e-7 * (1.0 + a_row.abs()) || a_r.abs() <= PIVOT_TOL {
                if !self.fresh {
                    self.refactor();
                    continue;
                }
                return self.primal();
            }
            let bound = if to_lower { self.lower[leaving] } else { self.upper[leaving] };
            let delta_q = (self.x[leaving] - bound) / a_r;
            self.x[entering] += delta_q;
            for p in 0..m {
                let a = self.col_buf[p];
                if a != 0.0 {
                    self.x[self.basis[p]] -= delta_q * a;
                }
            }
            let leave_state = if to_lower { VarState::Lower } else { VarState::Upper };
            self.pivot(leave, entering, leave_state);
            self.iterations += 1;

            if best_ratio * best_pivot <= DEGENERATE_STEP {
                degenerate_run += 1;
                if degenerate_run >= BLAND_AFTER {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
        }
    }
}
