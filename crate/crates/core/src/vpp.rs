//! Stochastic offering model of the virtual power plant: wind plus the
//! aggregated contract portfolio selling day-ahead and intraday, with
//! deviations settled in the balancing market.

use std::sync::OnceLock;

use milp_core::{solve_lp, Basis, Direction, LinearExpr, MilpModel, Sense, Status, VarId, Variable};
use serde::{Deserialize, Serialize};

use crate::contracts::{build_dag_blocks, ContractSet, DagBlockHandles, DagSchedule, LsRecovery};
use crate::error::{Result, VppError};
use crate::scenario::{validate_tree, Scenario, ScenarioTree};

/// Relative tolerance under which two day-ahead prices count as equal.
pub const PRICE_TOL: f64 = 1e-9;
/// Values below `-DECISION_TOL` are treated as genuinely negative.
pub const DECISION_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VppAssets {
    /// P_GW^Max, MW.
    pub wind_capacity: f64,
    pub contracts: ContractSet,
    /// P_Exp^Max, MW.
    pub expansion_cap: f64,
}

impl VppAssets {
    pub fn validate(&self, horizon: usize, recovery: LsRecovery) -> Result<()> {
        for (name, v) in [("wind_capacity", self.wind_capacity), ("expansion_cap", self.expansion_cap)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(VppError::ModelAssembly(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        self.contracts.validate(horizon, recovery)
    }

    /// Upper bound on any day-ahead or scheduled quantity.
    pub fn max_offer(&self) -> f64 {
        self.wind_capacity + self.contracts.max_output()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdNonanticipativity {
    /// One intraday offer per (day-ahead, intraday) price branch.
    #[default]
    Branch,
    /// One intraday offer per scenario.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VppOptions {
    pub ls_recovery: LsRecovery,
    pub id_nonanticipativity: IdNonanticipativity,
}

/// Variable handles of the VPP model, indexed `[scenario][hour]`.
#[derive(Debug, Clone)]
pub struct VppHandles {
    pub horizon: usize,
    pub da: Vec<Vec<VarId>>,
    pub id: Vec<Vec<VarId>>,
    pub sc: Vec<Vec<VarId>>,
    pub eps_plus: Vec<Vec<VarId>>,
    pub eps_minus: Vec<Vec<VarId>>,
    /// Component blocks, one per intraday branch.
    pub components: Vec<DagBlockHandles>,
    /// Component block used by each scenario.
    pub branch_of: Vec<usize>,
    /// `Z_n(X)`: profit of the decision under scenario `n`.
    pub profit: Vec<LinearExpr>,
}

/// Builds the expected-profit model with the coupling constraints. Offer-curve
/// constraints are added separately by [`add_offer_curve_constraints`].
pub fn build_vpp_model(assets: &VppAssets, tree: &ScenarioTree, options: &VppOptions) -> Result<(MilpModel, VppHandles)> {
    let horizon = tree.horizon;
    let violations = validate_tree(tree);
    if !violations.is_empty() {
        return Err(VppError::ModelAssembly(format!("invalid scenario tree: {}", violations.join("; "))));
    }
    if let Some(s) = tree.scenarios.iter().find(|s| s.wind.len() != horizon) {
        return Err(VppError::ModelAssembly(format!("scenario {} has {} hours, expected {horizon}", s.index + 1, s.wind.len())));
    }
    assets.validate(horizon, options.ls_recovery)?;

    let mut model = MilpModel::new(Direction::Maximize);
    let n_branches = tree.num_branches();
    let components = (0..n_branches)
        .map(|k| build_dag_blocks(&mut model, &assets.contracts, horizon, &format!("k{k}_"), options.ls_recovery))
        .collect::<Result<Vec<_>>>()?;

    let cap = assets.max_offer();
    let short_cap = assets.wind_capacity + assets.expansion_cap;
    let mut shared_id: Vec<Option<Vec<VarId>>> = vec![None; n_branches];
    let ns = tree.len();
    let mut handles = VppHandles {
        horizon,
        da: Vec::with_capacity(ns),
        id: Vec::with_capacity(ns),
        sc: Vec::with_capacity(ns),
        eps_plus: Vec::with_capacity(ns),
        eps_minus: Vec::with_capacity(ns),
        components,
        branch_of: Vec::with_capacity(ns),
        profit: Vec::with_capacity(ns),
    };
    let mut objective = LinearExpr::new();

    for (n, s) in tree.scenarios.iter().enumerate() {
        let k = tree.branch_of(n);
        let mut var = |name: String, lo: f64, hi: f64| model.add_variable(Variable::continuous(name, lo, hi));
        let da = (0..horizon).map(|h| var(format!("da_{n}_{h}"), 0.0, cap)).collect::<Result<Vec<_>, _>>()?;
        let id = match (options.id_nonanticipativity, &shared_id[k]) {
            (IdNonanticipativity::Branch, Some(ids)) => ids.clone(),
            _ => {
                let name = |h| match options.id_nonanticipativity {
                    IdNonanticipativity::Branch => format!("id_k{k}_{h}"),
                    IdNonanticipativity::Free => format!("id_{n}_{h}"),
                };
                let ids = (0..horizon).map(|h| var(name(h), 0.0, f64::INFINITY)).collect::<Result<Vec<_>, _>>()?;
                if options.id_nonanticipativity == IdNonanticipativity::Branch {
                    shared_id[k] = Some(ids.clone());
                }
                ids
            }
        };
        let sc = (0..horizon).map(|h| var(format!("sc_{n}_{h}"), 0.0, cap)).collect::<Result<Vec<_>, _>>()?;
        let ep = (0..horizon).map(|h| var(format!("epsp_{n}_{h}"), 0.0, f64::INFINITY)).collect::<Result<Vec<_>, _>>()?;
        let em = (0..horizon).map(|h| var(format!("epsm_{n}_{h}"), 0.0, short_cap)).collect::<Result<Vec<_>, _>>()?;

        let block = &handles.components[k];
        let mut profit = LinearExpr::new();
        for h in 0..horizon {
            let comp = block.total_power(h);
            model.add_constraint(
                format!("sched_{n}_{h}"),
                LinearExpr::new().term(sc[h], 1.0).term(da[h], -1.0).term(id[h], -1.0),
                Sense::Eq,
                0.0,
            )?;
            // ε+ − ε− = W + C − SC
            let dev = LinearExpr::new().term(ep[h], 1.0).term(em[h], -1.0).term(sc[h], 1.0) - comp.clone();
            model.add_constraint(format!("dev_{n}_{h}"), dev, Sense::Eq, s.wind[h])?;
            model.add_constraint(format!("epsp_cap_{n}_{h}"), LinearExpr::from(ep[h]) - comp, Sense::Le, s.wind[h])?;

            let rho = s.da_price[h];
            profit.add_term(da[h], rho);
            profit.add_term(id[h], s.id_price[h]);
            profit.add_term(ep[h], rho * s.eta_up[h]);
            profit.add_term(em[h], -rho * s.eta_down[h]);
            profit.add_expr(&block.total_cost(h), -1.0);
        }
        objective.add_expr(&profit, s.probability);
        handles.da.push(da);
        handles.id.push(id);
        handles.sc.push(sc);
        handles.eps_plus.push(ep);
        handles.eps_minus.push(em);
        handles.branch_of.push(k);
        handles.profit.push(profit);
    }
    model.set_objective(objective)?;
    Ok((model, handles))
}

/// Groups scenario indices by day-ahead price at hour `h`, ascending.
pub fn price_levels(tree: &ScenarioTree, h: usize) -> Vec<(f64, Vec<usize>)> {
    let mut order: Vec<usize> = (0..tree.len()).collect();
    order.sort_by(|&a, &b| tree.scenarios[a].da_price[h].total_cmp(&tree.scenarios[b].da_price[h]).then(a.cmp(&b)));
    let mut levels: Vec<(f64, Vec<usize>)> = Vec::new();
    for n in order {
        let price = tree.scenarios[n].da_price[h];
        match levels.last_mut() {
            Some((p, members)) if prices_equal(*p, price) => members.push(n),
            _ => levels.push((price, vec![n])),
        }
    }
    levels
}

pub fn prices_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= PRICE_TOL * a.abs().max(b.abs())
}

/// Day-ahead offers are equal for equal prices and nondecreasing in price.
pub fn add_offer_curve_constraints(model: &mut MilpModel, handles: &VppHandles, tree: &ScenarioTree) -> Result<()> {
    for h in 0..handles.horizon {
        let levels = price_levels(tree, h);
        let mut prev: Option<VarId> = None;
        for (g, (_, members)) in levels.iter().enumerate() {
            let head = handles.da[members[0]][h];
            for &n in &members[1..] {
                model.add_constraint(
                    format!("offer_eq_{h}_{n}"),
                    LinearExpr::new().term(handles.da[n][h], 1.0).term(head, -1.0),
                    Sense::Eq,
                    0.0,
                )?;
            }
            if let Some(p) = prev {
                model.add_constraint(
                    format!("offer_up_{h}_{g}"),
                    LinearExpr::new().term(head, 1.0).term(p, -1.0),
                    Sense::Ge,
                    0.0,
                )?;
            }
            prev = Some(head);
        }
    }
    Ok(())
}

/// The stochastic model with offer curves, ready to solve or extend.
#[derive(Debug, Clone)]
pub struct VppProblem {
    pub assets: VppAssets,
    pub tree: ScenarioTree,
    pub options: VppOptions,
    pub model: MilpModel,
    pub handles: VppHandles,
    relaxation_basis: OnceLock<Option<Basis>>,
}

impl VppProblem {
    pub fn new(assets: &VppAssets, tree: &ScenarioTree, options: &VppOptions) -> Result<Self> {
        let (mut model, handles) = build_vpp_model(assets, tree, options)?;
        add_offer_curve_constraints(&mut model, &handles, tree)?;
        Ok(VppProblem {
            assets: assets.clone(),
            tree: tree.clone(),
            options: *options,
            model,
            handles,
            relaxation_basis: OnceLock::new(),
        })
    }

    /// Optimal basis of the LP relaxation, computed on first use. Models that
    /// only append rows to `model` can start from it.
    pub fn relaxation_basis(&self) -> Option<&Basis> {
        self.relaxation_basis
            .get_or_init(|| {
                let sol = solve_lp(&self.model);
                sol.basis.filter(|_| sol.status == Status::Optimal)
            })
            .as_ref()
    }

    /// Reads the decision out of a solution vector.
    pub fn decision(&self, values: &[f64]) -> VppDecision {
        let read = |ids: &[VarId]| -> Vec<f64> { ids.iter().map(|v| values[v.index()]).collect() };
        let schedules: Vec<DagSchedule> = self
            .handles
            .components
            .iter()
            .map(|c| DagSchedule::from_values(values, c, &self.assets.contracts))
            .collect();
        // tied offers are equal up to solver noise; report the level's value
        let mut da: Vec<Vec<f64>> = (0..self.tree.len()).map(|n| read(&self.handles.da[n])).collect();
        for h in 0..self.tree.horizon {
            for (_, members) in price_levels(&self.tree, h) {
                let v = da[members[0]][h];
                for &n in &members[1..] {
                    da[n][h] = v;
                }
            }
        }
        let scenarios = da
            .into_iter()
            .enumerate()
            .map(|(n, da)| ScenarioDecision {
                da,
                id: read(&self.handles.id[n]),
                sc: read(&self.handles.sc[n]),
                eps_plus: read(&self.handles.eps_plus[n]),
                eps_minus: read(&self.handles.eps_minus[n]),
                branch: self.handles.branch_of[n],
                components: schedules[self.handles.branch_of[n]].clone(),
            })
            .collect();
        VppDecision { scenarios }
    }

    /// Settlement of `decision` in every scenario.
    pub fn evaluate(&self, decision: &VppDecision) -> Result<Vec<ProfitBreakdown>> {
        if decision.scenarios.len() != self.tree.len() {
            return Err(VppError::InvalidDecision(format!(
                "decision covers {} scenarios, tree has {}",
                decision.scenarios.len(),
                self.tree.len()
            )));
        }
        decision
            .scenarios
            .iter()
            .zip(&self.tree.scenarios)
            .map(|(d, s)| evaluate_profit(d, s, &self.assets.contracts, self.options.ls_recovery))
            .collect()
    }
}

/// Offers, deviations and component operation under one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioDecision {
    pub da: Vec<f64>,
    pub id: Vec<f64>,
    pub sc: Vec<f64>,
    pub eps_plus: Vec<f64>,
    pub eps_minus: Vec<f64>,
    /// Intraday branch whose component schedule applies.
    pub branch: usize,
    pub components: DagSchedule,
}

impl ScenarioDecision {
    /// All-zero offers with idle components.
    pub fn idle(horizon: usize, contracts: &ContractSet) -> Self {
        use crate::contracts::{ContractSchedule, StrategySchedule};
        let unit = || ContractSchedule {
            status: vec![false; horizon],
            start: vec![false; horizon],
            stop: vec![false; horizon],
            output: vec![0.0; horizon],
        };
        let strategy = |n: usize| StrategySchedule {
            power: vec![0.0; horizon],
            cost: vec![0.0; horizon],
            contracts: (0..n).map(|_| unit()).collect(),
        };
        ScenarioDecision {
            da: vec![0.0; horizon],
            id: vec![0.0; horizon],
            sc: vec![0.0; horizon],
            eps_plus: vec![0.0; horizon],
            eps_minus: vec![0.0; horizon],
            branch: 0,
            components: DagSchedule {
                lc: strategy(contracts.lc.len()),
                ls: strategy(contracts.ls.len()),
                og: strategy(contracts.og.len()),
                es: strategy(contracts.es.len()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VppDecision {
    pub scenarios: Vec<ScenarioDecision>,
}

/// Profit of a decision under one scenario, split by market.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ProfitBreakdown {
    pub da_revenue: f64,
    pub id_revenue: f64,
    pub positive_imbalance_revenue: f64,
    pub negative_imbalance_cost: f64,
    pub component_cost: f64,
    pub total: f64,
}

/// Settles `decision` under `scenario` from first principles: component
/// delivery and cost are recomputed from unit operation and contract data,
/// and the deviation is split into its positive and negative parts.
pub fn evaluate_profit(
    decision: &ScenarioDecision,
    scenario: &Scenario,
    contracts: &ContractSet,
    recovery: LsRecovery,
) -> Result<ProfitBreakdown> {
    let horizon = scenario.wind.len();
    let series = [
        ("da", &decision.da),
        ("id", &decision.id),
        ("sc", &decision.sc),
        ("eps_plus", &decision.eps_plus),
        ("eps_minus", &decision.eps_minus),
    ];
    for (name, s) in series {
        if s.len() != horizon {
            return Err(VppError::InvalidDecision(format!("{name} has {} hours, scenario has {horizon}", s.len())));
        }
    }
    if decision.components.horizon() != horizon {
        return Err(VppError::InvalidDecision("component schedule horizon mismatch".into()));
    }
    for h in 0..horizon {
        if decision.eps_plus[h] < -DECISION_TOL || decision.eps_minus[h] < -DECISION_TOL {
            return Err(VppError::InvalidDecision(format!(
                "negative deviation at hour {}: ({}, {})",
                h + 1,
                decision.eps_plus[h],
                decision.eps_minus[h]
            )));
        }
    }
    let delivered = decision.components.delivered_power(contracts, recovery);
    let cost = decision.components.operating_cost(contracts);
    let mut out = ProfitBreakdown::default();
    for h in 0..horizon {
        let rho = scenario.da_price[h];
        let dev = scenario.wind[h] + delivered[h] - decision.sc[h];
        out.da_revenue += rho * decision.da[h];
        out.id_revenue += scenario.id_price[h] * decision.id[h];
        out.positive_imbalance_revenue += rho * scenario.eta_up[h] * dev.max(0.0);
        out.negative_imbalance_cost += rho * scenario.eta_down[h] * (-dev).max(0.0);
        out.component_cost += cost[h];
    }
    out.total = out.da_revenue + out.id_revenue + out.positive_imbalance_revenue
        - out.negative_imbalance_cost
        - out.component_cost;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(wind: f64, price: f64, up: f64, down: f64) -> Scenario {
        Scenario {
            index: 0,
            probability: 1.0,
            wind: vec![wind],
            da_price: vec![price],
            id_price: vec![price],
            eta_up: vec![up],
            eta_down: vec![down],
            wind_branch: 0,
            da_branch: 0,
            id_branch: 0,
            balancing_branch: 0,
        }
    }

    #[test]
    fn zero_decision_zero_profit() {
        let d = ScenarioDecision::idle(1, &ContractSet::default());
        let p = evaluate_profit(&d, &scenario(0.0, 50.0, 1.0, 1.0), &ContractSet::default(), LsRecovery::Uniform).unwrap();
        assert_eq!(p, ProfitBreakdown::default());
    }

    #[test]
    fn surplus_settles_at_eta_up() {
        let mut d = ScenarioDecision::idle(1, &ContractSet::default());
        d.da[0] = 10.0;
        d.sc[0] = 10.0;
        d.eps_plus[0] = 2.0;
        let p = evaluate_profit(&d, &scenario(12.0, 50.0, 0.8, 1.0), &ContractSet::default(), LsRecovery::Uniform).unwrap();
        assert!((p.positive_imbalance_revenue - 80.0).abs() < 1e-12);
        assert!((p.total - 580.0).abs() < 1e-12);
    }

    #[test]
    fn negative_deviation_rejected() {
        let mut d = ScenarioDecision::idle(1, &ContractSet::default());
        d.eps_minus[0] = -1.0;
        let r = evaluate_profit(&d, &scenario(0.0, 50.0, 1.0, 1.0), &ContractSet::default(), LsRecovery::Uniform);
        assert!(matches!(r, Err(VppError::InvalidDecision(_))));
    }
}
