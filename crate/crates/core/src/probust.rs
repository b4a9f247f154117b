//! Stochastic p-robust offering: every scenario's profit must stay within a
//! relative regret `p` of what perfect foresight would have earned there.

use milp_core::{solve_milp, solve_milp_from, MilpModel, Sense, SolveOptions, Status};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, VppError};
use crate::scenario::ScenarioTree;
use crate::vpp::{ProfitBreakdown, VppAssets, VppDecision, VppOptions, VppProblem};

/// Slack granted to regret checks, relative to `|Z_f^*|`.
pub const REGRET_TOL: f64 = 1e-7;

/// Optimal profit of scenario `scenario` under perfect foresight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioOptimum {
    pub scenario: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbustStatus {
    Optimal,
    Infeasible,
}

/// How the regret of a scenario is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegretKind {
    /// `(Z_f^* − Z_f(X)) / Z_f^*`, bounded by `p`.
    #[default]
    Relative,
    /// `Z_f^* − Z_f(X)` in dollars, bounded by `p`.
    Absolute,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbustResult {
    /// Regret limit; `f64::INFINITY` for the plain stochastic model.
    pub p: f64,
    pub status: ProbustStatus,
    /// `Σ_f Q_f Z_f(X)` from the settlement of the decision.
    pub expected_profit: f64,
    /// `Z_f(X)` per scenario.
    pub profits: Vec<f64>,
    pub breakdowns: Vec<ProfitBreakdown>,
    /// Maximum regret of the decision, in the measure of `kind`.
    pub mrr: f64,
    pub lb: f64,
    pub ub: f64,
    pub solver_objective: f64,
    pub gap: f64,
    pub nodes: usize,
    pub kind: RegretKind,
    #[serde(skip)]
    pub decision: Option<VppDecision>,
}

impl ProbustResult {
    pub fn is_feasible(&self) -> bool {
        self.status == ProbustStatus::Optimal
    }

    fn infeasible(p: f64, kind: RegretKind, lb: f64, ub: f64) -> Self {
        ProbustResult {
            p,
            status: ProbustStatus::Infeasible,
            expected_profit: f64::NAN,
            profits: Vec::new(),
            breakdowns: Vec::new(),
            mrr: f64::NAN,
            lb,
            ub,
            solver_objective: f64::NAN,
            gap: f64::NAN,
            nodes: 0,
            kind,
            decision: None,
        }
    }
}

fn optimum_options(solve: &SolveOptions) -> SolveOptions {
    SolveOptions { gap_tol: solve.gap_tol.min(1e-9), ..*solve }
}

/// Solves every single-scenario problem; results are in scenario order.
pub fn solve_scenario_optima(
    assets: &VppAssets,
    tree: &ScenarioTree,
    options: &VppOptions,
    solve: &SolveOptions,
) -> Result<Vec<ScenarioOptimum>> {
    let solve = optimum_options(solve);
    (0..tree.len())
        .into_par_iter()
        .map(|f| {
            let problem = VppProblem::new(assets, &tree.single(f), options)?;
            let sol = solve_milp(&problem.model, &solve);
            match sol.status {
                Status::Optimal => {}
                Status::Infeasible => return Err(VppError::ScenarioInfeasible { scenario: f + 1 }),
                status => return Err(VppError::Solver { stage: format!("scenario {} optimum", f + 1), status }),
            }
            Ok(ScenarioOptimum { scenario: f, value: sol.objective })
        })
        .collect()
}

/// `max_f (Z_f^* − Z_f(X)) / Z_f^*`.
pub fn compute_mrr(optima: &[f64], profits: &[f64]) -> Result<f64> {
    check_positive(optima)?;
    Ok(optima.iter().zip(profits).map(|(z, x)| (z - x) / z).fold(f64::NEG_INFINITY, f64::max))
}

/// `max_f (Z_f^* − Z_f(X))`.
pub fn compute_max_absolute_regret(optima: &[f64], profits: &[f64]) -> f64 {
    optima.iter().zip(profits).map(|(z, x)| z - x).fold(f64::NEG_INFINITY, f64::max)
}

fn check_positive(optima: &[f64]) -> Result<()> {
    match optima.iter().position(|&z| !(z > 0.0)) {
        Some(f) => Err(VppError::RegretUndefined { scenario: f + 1, optimum: optima[f] }),
        None => Ok(()),
    }
}

/// `(LB, UB) = (Σ Q_f (1−p) Z_f^*, Σ Q_f Z_f^*)`; LB is `−∞` for infinite `p`.
pub fn bounds(optima: &[f64], p: f64, probabilities: &[f64]) -> (f64, f64) {
    let ub: f64 = optima.iter().zip(probabilities).map(|(z, q)| q * z).sum();
    let lb = if p.is_finite() { (1.0 - p) * ub } else { f64::NEG_INFINITY };
    (lb, ub)
}

fn absolute_bounds(optima: &[f64], budget: f64, probabilities: &[f64]) -> (f64, f64) {
    let (_, ub) = bounds(optima, f64::INFINITY, probabilities);
    (if budget.is_finite() { ub - budget } else { f64::NEG_INFINITY }, ub)
}

fn values(optima: &[ScenarioOptimum], tree: &ScenarioTree) -> Result<Vec<f64>> {
    if optima.len() != tree.len() || optima.iter().enumerate().any(|(f, o)| o.scenario != f) {
        return Err(VppError::InternalInconsistency(format!(
            "{} scenario optima for a tree of {} scenarios",
            optima.len(),
            tree.len()
        )));
    }
    Ok(optima.iter().map(|o| o.value).collect())
}

/// Maximizes expected profit subject to a relative regret of at most `p` in
/// every scenario. `p = ∞` drops the regret rows.
pub fn solve_probust(
    problem: &VppProblem,
    optima: &[ScenarioOptimum],
    p: f64,
    solve: &SolveOptions,
) -> Result<ProbustResult> {
    solve_regret_constrained(problem, optima, p, RegretKind::Relative, solve)
}

/// As [`solve_probust`] with `budget` a dollar bound on each scenario's regret.
pub fn solve_probust_absolute(
    problem: &VppProblem,
    optima: &[ScenarioOptimum],
    budget: f64,
    solve: &SolveOptions,
) -> Result<ProbustResult> {
    solve_regret_constrained(problem, optima, budget, RegretKind::Absolute, solve)
}

/// The stochastic model plus one regret row per scenario; `p = ∞` adds none.
pub fn build_probust_model(
    problem: &VppProblem,
    optima: &[ScenarioOptimum],
    p: f64,
    kind: RegretKind,
) -> Result<MilpModel> {
    let z = values(optima, &problem.tree)?;
    if p.is_nan() || p < 0.0 {
        return Err(VppError::ModelAssembly(format!("regret limit must be >= 0, got {p}")));
    }
    if kind == RegretKind::Relative && p.is_finite() {
        check_positive(&z)?;
    }
    let mut model = problem.model.clone();
    if p.is_finite() {
        for (f, expr) in problem.handles.profit.iter().enumerate() {
            let rhs = match kind {
                RegretKind::Relative => (1.0 - p) * z[f],
                RegretKind::Absolute => z[f] - p,
            };
            model.add_constraint(format!("regret_{f}"), expr.clone(), Sense::Ge, rhs)?;
        }
    }
    Ok(model)
}

fn solve_regret_constrained(
    problem: &VppProblem,
    optima: &[ScenarioOptimum],
    p: f64,
    kind: RegretKind,
    solve: &SolveOptions,
) -> Result<ProbustResult> {
    let model = build_probust_model(problem, optima, p, kind)?;
    let z = values(optima, &problem.tree)?;
    let probs = problem.tree.probabilities();
    let (lb, ub) = match kind {
        RegretKind::Relative => bounds(&z, p, &probs),
        RegretKind::Absolute => absolute_bounds(&z, p, &probs),
    };
    let sol = match problem.relaxation_basis() {
        Some(start) => solve_milp_from(&model, solve, start),
        None => solve_milp(&model, solve),
    };
    match sol.status {
        Status::Optimal => {}
        Status::Infeasible => return Ok(ProbustResult { nodes: sol.nodes, ..ProbustResult::infeasible(p, kind, lb, ub) }),
        status => return Err(VppError::Solver { stage: format!("p-robust model at p = {p}"), status }),
    }
    let decision = problem.decision(&sol.values);
    let breakdowns = problem.evaluate(&decision)?;
    let profits: Vec<f64> = breakdowns.iter().map(|b| b.total).collect();
    let expected_profit = profits.iter().zip(&probs).map(|(x, q)| q * x).sum();
    let mrr = match kind {
        RegretKind::Relative => compute_mrr(&z, &profits).unwrap_or(f64::NAN),
        RegretKind::Absolute => compute_max_absolute_regret(&z, &profits),
    };
    Ok(ProbustResult {
        p,
        status: ProbustStatus::Optimal,
        expected_profit,
        profits,
        breakdowns,
        mrr,
        lb,
        ub,
        solver_objective: sol.objective,
        gap: sol.gap,
        nodes: sol.nodes,
        kind,
        decision: Some(decision),
    })
}

/// The p values of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum PGrid {
    /// `steps + 1` points from the risk-neutral regret down to zero.
    FromRiskNeutral { steps: usize },
    /// `start, start − step, …` down to `stop` (inclusive within 1e-12).
    Linear { start: f64, step: f64, stop: f64 },
    Explicit(Vec<f64>),
}

impl PGrid {
    /// Descending grid points, given the regret of the risk-neutral solution.
    pub fn points(&self, risk_neutral_mrr: f64) -> Result<Vec<f64>> {
        let pts = match self {
            PGrid::FromRiskNeutral { steps } => {
                let steps = (*steps).max(1);
                (0..=steps).map(|k| risk_neutral_mrr * (steps - k) as f64 / steps as f64).collect()
            }
            PGrid::Linear { start, step, stop } => {
                if !(*step > 0.0) {
                    return Err(VppError::ModelAssembly(format!("grid step must be positive, got {step}")));
                }
                let n = ((start - stop) / step + 1e-12).floor().max(-1.0) as i64;
                (0..=n).map(|k| start - k as f64 * step).collect()
            }
            PGrid::Explicit(v) => v.clone(),
        };
        if pts.windows(2).any(|w| w[1] > w[0]) {
            return Err(VppError::ModelAssembly("p grid must be descending".into()));
        }
        if pts.iter().any(|p| !(*p >= 0.0)) {
            return Err(VppError::ModelAssembly("p grid values must be >= 0".into()));
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub optima: Vec<ScenarioOptimum>,
    /// `p = ∞` first, then the grid down to the first infeasible point.
    pub results: Vec<ProbustResult>,
    /// Smallest feasible grid value.
    pub p_min: Option<f64>,
}

impl SweepReport {
    pub fn risk_neutral(&self) -> &ProbustResult {
        &self.results[0]
    }

    /// The result at `p_min`.
    pub fn risk_averse(&self) -> Option<&ProbustResult> {
        self.results.iter().rev().find(|r| r.is_feasible() && r.p.is_finite())
    }
}

/// Risk-neutral solve followed by the grid, stopping at the first infeasible
/// point. Grid points are solved in batches of the rayon pool size.
pub fn sweep_p(
    problem: &VppProblem,
    optima: &[ScenarioOptimum],
    grid: &PGrid,
    solve: &SolveOptions,
) -> Result<SweepReport> {
    check_positive(&values(optima, &problem.tree)?)?;
    let neutral = solve_probust(problem, optima, f64::INFINITY, solve)?;
    if !neutral.is_feasible() {
        return Err(VppError::InternalInconsistency("the risk-neutral model is infeasible".into()));
    }
    let points = grid.points(neutral.mrr.max(0.0))?;
    let mut results = vec![neutral];
    let batch = rayon::current_num_threads().max(1);
    'outer: for chunk in points.chunks(batch) {
        let solved = chunk
            .par_iter()
            .map(|&p| solve_probust(problem, optima, p, solve))
            .collect::<Result<Vec<_>>>()?;
        for r in solved {
            let stop = !r.is_feasible();
            results.push(r);
            if stop {
                break 'outer;
            }
        }
    }
    keep_regret_monotone(&mut results, solve.gap_tol);
    let p_min = results.iter().filter(|r| r.is_feasible() && r.p.is_finite()).map(|r| r.p).last();
    Ok(SweepReport { optima: optima.to_vec(), results, p_min })
}

/// Among alternative optima, keeps the previous point's decision whenever it
/// is still feasible and no worse within the gap, so regret never rises as p
/// falls.
fn keep_regret_monotone(results: &mut [ProbustResult], gap: f64) {
    for k in 1..results.len() {
        let (head, tail) = results.split_at_mut(k);
        let prev = &head[k - 1];
        let cur = &mut tail[0];
        if !prev.is_feasible() || !cur.is_feasible() {
            continue;
        }
        let fits = prev.mrr <= cur.p + REGRET_TOL;
        let tol = gap * cur.expected_profit.abs().max(1.0) + 1e-9;
        if cur.mrr > prev.mrr && fits && prev.expected_profit >= cur.expected_profit - tol {
            let (p, lb) = (cur.p, cur.lb);
            *cur = prev.clone();
            cur.p = p;
            cur.lb = lb;
        }
    }
}

/// Bisection for the smallest feasible relative regret limit, to within `tol`.
pub fn find_min_feasible_p(
    problem: &VppProblem,
    optima: &[ScenarioOptimum],
    tol: f64,
    solve: &SolveOptions,
) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(VppError::ModelAssembly(format!("tolerance must be positive, got {tol}")));
    }
    check_positive(&values(optima, &problem.tree)?)?;
    let neutral = solve_probust(problem, optima, f64::INFINITY, solve)?;
    if !neutral.is_feasible() {
        return Err(VppError::InternalInconsistency("the risk-neutral model is infeasible".into()));
    }
    let mut hi = neutral.mrr.max(0.0);
    if !solve_probust(problem, optima, hi, solve)?.is_feasible() {
        return Err(VppError::InternalInconsistency(format!(
            "infeasible at p = {hi}, the regret of the risk-neutral solution"
        )));
    }
    if solve_probust(problem, optima, 0.0, solve)?.is_feasible() {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if solve_probust(problem, optima, mid, solve)?.is_feasible() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
