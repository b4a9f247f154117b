//! Demand-response contract blocks and the aggregator's self-scheduling model.
//!
//! Hours are zero-based inside the library. Every block starts cold: the
//! status before the first hour is off, so a first-hour start pays its
//! initiation or startup cost.

use std::fmt;
use std::str::FromStr;

use milp_core::{solve_milp, Direction, LinearExpr, MilpModel, Sense, SolveOptions, Status, VarId, Variable};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VppError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Lc,
    Ls,
    Og,
    Es,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Lc, Strategy::Ls, Strategy::Og, Strategy::Es];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::Lc => "LC",
            Strategy::Ls => "LS",
            Strategy::Og => "OG",
            Strategy::Es => "ES",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Set of hours written `a-b` (one-based, inclusive) in data files; an empty
/// cell or `none` is the empty window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct HourWindow {
    range: Option<(usize, usize)>,
}

impl HourWindow {
    /// Zero-based inclusive range `first..=last`.
    pub fn new(first: usize, last: usize) -> Self {
        assert!(first <= last, "window start after end");
        HourWindow { range: Some((first, last)) }
    }

    pub fn empty() -> Self {
        HourWindow { range: None }
    }

    pub fn full(horizon: usize) -> Self {
        if horizon == 0 {
            HourWindow::empty()
        } else {
            HourWindow::new(0, horizon - 1)
        }
    }

    pub fn contains(&self, h: usize) -> bool {
        self.range.is_some_and(|(a, b)| (a..=b).contains(&h))
    }

    pub fn hours(&self) -> impl Iterator<Item = usize> {
        let (a, b) = self.range.map_or((1, 0), |r| r);
        a..=b
    }

    pub fn len(&self) -> usize {
        self.range.map_or(0, |(a, b)| b - a + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_none()
    }

    pub fn last(&self) -> Option<usize> {
        self.range.map(|(_, b)| b)
    }
}

impl FromStr for HourWindow {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let t = s.trim();
        if t.is_empty() || t.eq_ignore_ascii_case("none") {
            return Ok(HourWindow::empty());
        }
        let (a, b) = match t.split_once('-') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (t, t),
        };
        let a: usize = a.parse().map_err(|_| format!("bad hour `{a}` in window `{s}`"))?;
        let b: usize = b.parse().map_err(|_| format!("bad hour `{b}` in window `{s}`"))?;
        if a == 0 || b == 0 {
            return Err(format!("window `{s}`: hours are numbered from 1"));
        }
        if a > b {
            return Err(format!("window `{s}` ends before it starts"));
        }
        Ok(HourWindow::new(a - 1, b - 1))
    }
}

impl TryFrom<String> for HourWindow {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<HourWindow> for String {
    fn from(w: HourWindow) -> String {
        w.to_string()
    }
}

impl fmt::Display for HourWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.range {
            Some((a, b)) => write!(f, "{}-{}", a + 1, b + 1),
            None => f.write_str("none"),
        }
    }
}

/// Load curtailment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LcContract {
    /// MW curtailed while active.
    pub quantity: f64,
    /// $/MWh paid to the customer.
    pub price: f64,
    pub initiation_cost: f64,
    pub min_duration: usize,
    pub max_duration: usize,
    pub max_daily_curtailments: usize,
}

/// Load shifting: reduction inside one window, recovered in another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LsContract {
    pub quantity: f64,
    pub price: f64,
    pub initiation_cost: f64,
    pub min_duration: usize,
    pub max_duration: usize,
    pub reduction_window: HourWindow,
    pub recovery_window: HourWindow,
    pub shift_fraction: f64,
}

impl LsContract {
    /// MW actually shifted while active.
    pub fn shifted(&self) -> f64 {
        self.shift_fraction * self.quantity
    }
}

/// Onsite generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OgContract {
    pub p_min: f64,
    pub p_max: f64,
    pub price: f64,
    pub startup_cost: f64,
    /// MBtu burnt per start.
    pub startup_fuel: f64,
    /// MBtu per MWh.
    pub fuel_factor: f64,
    pub fuel_limit: f64,
    pub min_on: usize,
    pub min_off: usize,
    pub ramp_up: f64,
    pub ramp_down: f64,
}

/// Energy storage, discharge only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsContract {
    pub power_rating: f64,
    pub energy_capacity: f64,
    pub efficiency: f64,
    pub price: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    /// Longest discharge episode, hours.
    pub retention_time: usize,
    pub max_cycles: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContractSet {
    pub lc: Vec<LcContract>,
    pub ls: Vec<LsContract>,
    pub og: Vec<OgContract>,
    pub es: Vec<EsContract>,
}

impl ContractSet {
    pub fn is_empty(&self) -> bool {
        self.lc.is_empty() && self.ls.is_empty() && self.og.is_empty() && self.es.is_empty()
    }

    pub fn count(&self, strategy: Strategy) -> usize {
        match strategy {
            Strategy::Lc => self.lc.len(),
            Strategy::Ls => self.ls.len(),
            Strategy::Og => self.og.len(),
            Strategy::Es => self.es.len(),
        }
    }

    /// Largest combined hourly output of all contracts.
    pub fn max_output(&self) -> f64 {
        self.lc.iter().map(|c| c.quantity).sum::<f64>()
            + self.ls.iter().map(LsContract::shifted).sum::<f64>()
            + self.og.iter().map(|c| c.p_max).sum::<f64>()
            + self.es.iter().map(|c| c.power_rating).sum::<f64>()
    }

    /// Checks every contract against the horizon.
    pub fn validate(&self, horizon: usize, recovery: LsRecovery) -> Result<()> {
        for (i, c) in self.lc.iter().enumerate() {
            check_lc(c, i, horizon)?;
        }
        for (i, c) in self.ls.iter().enumerate() {
            check_ls(c, i, horizon, recovery)?;
        }
        for (i, c) in self.og.iter().enumerate() {
            check_og(c, i)?;
        }
        for (i, c) in self.es.iter().enumerate() {
            check_es(c, i, horizon)?;
        }
        Ok(())
    }
}

/// How shifted load comes back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LsRecovery {
    /// Reduction only.
    None,
    /// Shifted energy is consumed evenly over the recovery window.
    #[default]
    Uniform,
}

fn malformed(strategy: Strategy, index: usize, reason: impl Into<String>) -> VppError {
    VppError::MalformedContract { strategy: strategy.label(), index, reason: reason.into() }
}

fn unschedulable(strategy: Strategy, index: usize, reason: impl Into<String>) -> VppError {
    VppError::UnschedulableContract { strategy: strategy.label(), index, reason: reason.into() }
}

fn check_nonneg(strategy: Strategy, index: usize, fields: &[(&str, f64)]) -> Result<()> {
    for &(name, v) in fields {
        if !v.is_finite() || v < 0.0 {
            return Err(malformed(strategy, index, format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    Ok(())
}

fn check_durations(strategy: Strategy, index: usize, min: usize, max: usize, horizon: usize) -> Result<()> {
    if min < 1 || min > max {
        return Err(malformed(strategy, index, format!("durations must satisfy 1 <= min <= max, got {min}..{max}")));
    }
    if min > horizon {
        return Err(unschedulable(strategy, index, format!("minimum duration {min} h exceeds the {horizon} h horizon")));
    }
    Ok(())
}

fn check_lc(c: &LcContract, i: usize, horizon: usize) -> Result<()> {
    let s = Strategy::Lc;
    check_nonneg(s, i, &[("quantity", c.quantity), ("price", c.price), ("initiation_cost", c.initiation_cost)])?;
    check_durations(s, i, c.min_duration, c.max_duration, horizon)?;
    if c.max_daily_curtailments < 1 {
        return Err(malformed(s, i, "max_daily_curtailments must be at least 1"));
    }
    Ok(())
}

fn check_ls(c: &LsContract, i: usize, horizon: usize, recovery: LsRecovery) -> Result<()> {
    let s = Strategy::Ls;
    check_nonneg(s, i, &[("quantity", c.quantity), ("price", c.price), ("initiation_cost", c.initiation_cost)])?;
    if !(0.0..=1.0).contains(&c.shift_fraction) {
        return Err(malformed(s, i, format!("shift_fraction must lie in [0, 1], got {}", c.shift_fraction)));
    }
    check_durations(s, i, c.min_duration, c.max_duration, horizon)?;
    for (name, w) in [("reduction", &c.reduction_window), ("recovery", &c.recovery_window)] {
        if w.last().is_some_and(|l| l >= horizon) {
            return Err(malformed(s, i, format!("{name} window {w} extends past hour {horizon}")));
        }
    }
    if c.reduction_window.is_empty() {
        return Err(unschedulable(s, i, "empty reduction window"));
    }
    if c.reduction_window.len() < c.min_duration {
        return Err(unschedulable(
            s,
            i,
            format!("reduction window {} is shorter than the minimum duration {}", c.reduction_window, c.min_duration),
        ));
    }
    if recovery == LsRecovery::Uniform && c.recovery_window.is_empty() {
        return Err(unschedulable(s, i, "empty recovery window"));
    }
    Ok(())
}

fn check_og(c: &OgContract, i: usize) -> Result<()> {
    let s = Strategy::Og;
    check_nonneg(
        s,
        i,
        &[
            ("p_min", c.p_min),
            ("p_max", c.p_max),
            ("price", c.price),
            ("startup_cost", c.startup_cost),
            ("startup_fuel", c.startup_fuel),
            ("fuel_factor", c.fuel_factor),
            ("fuel_limit", c.fuel_limit),
            ("ramp_up", c.ramp_up),
            ("ramp_down", c.ramp_down),
        ],
    )?;
    if !(c.p_min > 0.0 && c.p_min <= c.p_max) {
        return Err(malformed(s, i, format!("need 0 < p_min <= p_max, got {}..{}", c.p_min, c.p_max)));
    }
    if c.p_min * c.min_on as f64 * c.fuel_factor > c.fuel_limit {
        return Err(unschedulable(
            s,
            i,
            format!("one minimum-length run burns {} MBtu, above the {} MBtu limit", c.p_min * c.min_on as f64 * c.fuel_factor, c.fuel_limit),
        ));
    }
    Ok(())
}

fn check_es(c: &EsContract, i: usize, horizon: usize) -> Result<()> {
    let s = Strategy::Es;
    check_nonneg(
        s,
        i,
        &[
            ("power_rating", c.power_rating),
            ("energy_capacity", c.energy_capacity),
            ("price", c.price),
            ("ramp_up", c.ramp_up),
            ("ramp_down", c.ramp_down),
        ],
    )?;
    if !(c.efficiency > 0.0 && c.efficiency <= 1.0) {
        return Err(malformed(s, i, format!("efficiency must lie in (0, 1], got {}", c.efficiency)));
    }
    if c.retention_time < 1 {
        return Err(malformed(s, i, "retention_time must be at least 1 h"));
    }
    if c.retention_time > horizon {
        return Err(malformed(s, i, format!("retention_time {} h exceeds the horizon", c.retention_time)));
    }
    Ok(())
}

/// Variables of one contract. `output` is empty for LC and LS, whose delivery
/// is quantity times status; `cost_aux` holds initiation (LC/LS) or startup
/// cost (OG) variables and `fuel_aux` the OG startup fuel.
#[derive(Debug, Clone, Default)]
pub struct ContractHandles {
    pub status: Vec<VarId>,
    pub start: Vec<VarId>,
    pub stop: Vec<VarId>,
    pub output: Vec<VarId>,
    pub cost_aux: Vec<VarId>,
    pub fuel_aux: Vec<VarId>,
}

/// Hourly aggregate delivery `P_h` and cost `CP_h` of one strategy.
#[derive(Debug, Clone, Default)]
pub struct StrategyHandles {
    pub power: Vec<VarId>,
    pub cost: Vec<VarId>,
    pub contracts: Vec<ContractHandles>,
}

#[derive(Debug, Clone)]
pub struct DagBlockHandles {
    pub horizon: usize,
    pub lc: StrategyHandles,
    pub ls: StrategyHandles,
    pub og: StrategyHandles,
    pub es: StrategyHandles,
}

impl DagBlockHandles {
    pub fn strategy(&self, s: Strategy) -> &StrategyHandles {
        match s {
            Strategy::Lc => &self.lc,
            Strategy::Ls => &self.ls,
            Strategy::Og => &self.og,
            Strategy::Es => &self.es,
        }
    }

    /// `Σ_x P_h^x`
    pub fn total_power(&self, h: usize) -> LinearExpr {
        Strategy::ALL.iter().fold(LinearExpr::new(), |e, &s| e.term(self.strategy(s).power[h], 1.0))
    }

    /// `Σ_x CP_h^x`
    pub fn total_cost(&self, h: usize) -> LinearExpr {
        Strategy::ALL.iter().fold(LinearExpr::new(), |e, &s| e.term(self.strategy(s).cost[h], 1.0))
    }
}

struct Block<'m> {
    model: &'m mut MilpModel,
    prefix: String,
    horizon: usize,
}

impl Block<'_> {
    fn var(&mut self, name: String, v: Variable) -> Result<VarId> {
        let v = Variable { name: format!("{}{}", self.prefix, name), ..v };
        Ok(self.model.add_variable(v)?)
    }

    fn row(&mut self, name: String, expr: LinearExpr, sense: Sense, rhs: f64) -> Result<()> {
        self.model.add_constraint(format!("{}{}", self.prefix, name), expr, sense, rhs)?;
        Ok(())
    }

    fn binaries(&mut self, tag: &str) -> Result<Vec<VarId>> {
        (0..self.horizon).map(|h| self.var(format!("{tag}_{h}"), Variable::binary(""))).collect()
    }

    fn nonneg(&mut self, tag: &str) -> Result<Vec<VarId>> {
        (0..self.horizon).map(|h| self.var(format!("{tag}_{h}"), Variable::nonneg(""))).collect()
    }

    /// Aggregate variables `P_h`, `CP_h` tied to the given per-hour expressions.
    fn aggregates(&mut self, tag: &str, power: Vec<LinearExpr>, cost: Vec<LinearExpr>, free_power: bool) -> Result<(Vec<VarId>, Vec<VarId>)> {
        let mut p = Vec::with_capacity(self.horizon);
        let mut cp = Vec::with_capacity(self.horizon);
        for (h, (pe, ce)) in power.into_iter().zip(cost).enumerate() {
            let pv = if free_power { Variable::free("") } else { Variable::nonneg("") };
            let pv = self.var(format!("P{tag}_{h}"), pv)?;
            let cv = self.var(format!("CP{tag}_{h}"), Variable::nonneg(""))?;
            self.row(format!("agg{tag}_{h}"), LinearExpr::from(pv) - pe, Sense::Eq, 0.0)?;
            self.row(format!("cost{tag}_{h}"), LinearExpr::from(cv) - ce, Sense::Eq, 0.0)?;
            p.push(pv);
            cp.push(cv);
        }
        Ok((p, cp))
    }

    /// Status, start and stop binaries with the start/stop logic, mutual
    /// exclusion and the rows that make F and W integral once Y is.
    fn episodes(&mut self, tag: &str, allowed: impl Fn(usize) -> bool) -> Result<(Vec<VarId>, Vec<VarId>, Vec<VarId>)> {
        let y = self.binaries(&format!("{tag}_y"))?;
        let f = self.binaries(&format!("{tag}_f"))?;
        let w = self.binaries(&format!("{tag}_w"))?;
        self.model.set_bounds(w[0], 0.0, 0.0)?;
        for h in 0..self.horizon {
            if !allowed(h) {
                self.model.set_bounds(y[h], 0.0, 0.0)?;
                self.model.set_bounds(f[h], 0.0, 0.0)?;
            }
            let mut logic = LinearExpr::new().term(f[h], 1.0).term(w[h], -1.0).term(y[h], -1.0);
            if h > 0 {
                logic.add_term(y[h - 1], 1.0);
            }
            self.row(format!("{tag}_logic_{h}"), logic, Sense::Eq, 0.0)?;
            self.row(format!("{tag}_excl_{h}"), LinearExpr::new().term(f[h], 1.0).term(w[h], 1.0), Sense::Le, 1.0)?;
            self.row(format!("{tag}_fy_{h}"), LinearExpr::new().term(f[h], 1.0).term(y[h], -1.0), Sense::Le, 0.0)?;
            if h > 0 {
                self.row(
                    format!("{tag}_fprev_{h}"),
                    LinearExpr::new().term(f[h], 1.0).term(y[h - 1], 1.0),
                    Sense::Le,
                    1.0,
                )?;
            }
        }
        Ok((y, f, w))
    }

    /// `Σ_{h..h+D−1} Y ≥ D·F_h`, keeping only in-horizon terms, plus the
    /// disaggregated form `Σ_{h−D+1..h} F ≤ Y_h` with late starts fixed to zero.
    fn min_duration(&mut self, tag: &str, y: &[VarId], f: &[VarId], d: usize) -> Result<()> {
        if d <= 1 {
            return Ok(());
        }
        for h in 0..self.horizon {
            let end = (h + d).min(self.horizon);
            let expr = (h..end).fold(LinearExpr::new().term(f[h], -(d as f64)), |e, k| e.term(y[k], 1.0));
            self.row(format!("{tag}_mindur_{h}"), expr, Sense::Ge, 0.0)?;
            if h + d > self.horizon {
                self.model.set_bounds(f[h], 0.0, 0.0)?;
            }
            let recent = (h + 1).saturating_sub(d)..=h;
            let expr = recent.fold(LinearExpr::new().term(y[h], -1.0), |e, k| e.term(f[k], 1.0));
            self.row(format!("{tag}_minon_{h}"), expr, Sense::Le, 0.0)?;
        }
        Ok(())
    }

    /// A start at `h` needs a stop within the next `d` hours when that window
    /// lies inside the horizon.
    /// Also adds `Y_h ≤ Σ_{h−D+1..h} F`: a unit on at `h` started at most
    /// `d` hours earlier.
    fn max_duration(&mut self, tag: &str, y: &[VarId], f: &[VarId], w: &[VarId], d: usize) -> Result<()> {
        for h in 0..self.horizon {
            if h + d < self.horizon {
                let expr = (h + 1..=h + d).fold(LinearExpr::new().term(f[h], -1.0), |e, k| e.term(w[k], 1.0));
                self.row(format!("{tag}_maxdur_{h}"), expr, Sense::Ge, 0.0)?;
            }
            let expr = ((h + 1).saturating_sub(d)..=h).fold(LinearExpr::new().term(y[h], 1.0), |e, k| e.term(f[k], -1.0));
            self.row(format!("{tag}_recent_{h}"), expr, Sense::Le, 0.0)?;
        }
        Ok(())
    }

    fn count(&mut self, tag: &str, f: &[VarId], limit: usize) -> Result<()> {
        let expr = f.iter().fold(LinearExpr::new(), |e, &v| e.term(v, 1.0));
        self.row(format!("{tag}_count"), expr, Sense::Le, limit as f64)
    }

    fn ramps(&mut self, tag: &str, t: &[VarId], up: f64, down: f64) -> Result<()> {
        for h in 0..self.horizon {
            let mut rise = LinearExpr::from(t[h]);
            if h > 0 {
                rise.add_term(t[h - 1], -1.0);
            }
            self.row(format!("{tag}_rampup_{h}"), rise, Sense::Le, up)?;
            if h > 0 {
                let fall = LinearExpr::new().term(t[h - 1], 1.0).term(t[h], -1.0);
                self.row(format!("{tag}_rampdown_{h}"), fall, Sense::Le, down)?;
            }
        }
        Ok(())
    }
}

pub fn build_lc_block(model: &mut MilpModel, contracts: &[LcContract], horizon: usize, prefix: &str) -> Result<StrategyHandles> {
    let mut b = Block { model, prefix: prefix.to_string(), horizon };
    let mut power = vec![LinearExpr::new(); horizon];
    let mut cost = vec![LinearExpr::new(); horizon];
    let mut handles = Vec::new();
    for (i, c) in contracts.iter().enumerate() {
        check_lc(c, i, horizon)?;
        let tag = format!("lc{i}");
        let (y, f, w) = b.episodes(&tag, |_| true)?;
        let pia = b.nonneg(&format!("{tag}_pia"))?;
        for h in 0..horizon {
            b.row(format!("{tag}_init_{h}"), LinearExpr::new().term(pia[h], 1.0).term(f[h], -c.initiation_cost), Sense::Ge, 0.0)?;
            power[h].add_term(y[h], c.quantity);
            cost[h].add_term(pia[h], 1.0);
            cost[h].add_term(y[h], c.price * c.quantity);
        }
        b.min_duration(&tag, &y, &f, c.min_duration)?;
        b.max_duration(&tag, &y, &f, &w, c.max_duration)?;
        b.count(&tag, &f, c.max_daily_curtailments)?;
        handles.push(ContractHandles { status: y, start: f, stop: w, cost_aux: pia, ..Default::default() });
    }
    let (p, cp) = b.aggregates("lc", power, cost, false)?;
    Ok(StrategyHandles { power: p, cost: cp, contracts: handles })
}

pub fn build_ls_block(
    model: &mut MilpModel,
    contracts: &[LsContract],
    horizon: usize,
    prefix: &str,
    recovery: LsRecovery,
) -> Result<StrategyHandles> {
    let mut b = Block { model, prefix: prefix.to_string(), horizon };
    let mut power = vec![LinearExpr::new(); horizon];
    let mut cost = vec![LinearExpr::new(); horizon];
    let mut handles = Vec::new();
    for (i, c) in contracts.iter().enumerate() {
        check_ls(c, i, horizon, recovery)?;
        let tag = format!("ls{i}");
        let window = c.reduction_window.clone();
        let (y, f, w) = b.episodes(&tag, |h| window.contains(h))?;
        let pia = b.nonneg(&format!("{tag}_pia"))?;
        let q = c.shifted();
        for h in 0..horizon {
            b.row(format!("{tag}_init_{h}"), LinearExpr::new().term(pia[h], 1.0).term(f[h], -c.initiation_cost), Sense::Ge, 0.0)?;
            power[h].add_term(y[h], q);
            cost[h].add_term(pia[h], 1.0);
            cost[h].add_term(y[h], c.price * q);
        }
        if recovery == LsRecovery::Uniform {
            let share = q / c.recovery_window.len() as f64;
            for r in c.recovery_window.hours() {
                for h in window.hours() {
                    power[r].add_term(y[h], -share);
                }
            }
        }
        b.min_duration(&tag, &y, &f, c.min_duration)?;
        b.max_duration(&tag, &y, &f, &w, c.max_duration)?;
        handles.push(ContractHandles { status: y, start: f, stop: w, cost_aux: pia, ..Default::default() });
    }
    let free = recovery == LsRecovery::Uniform && !contracts.is_empty();
    let (p, cp) = b.aggregates("ls", power, cost, free)?;
    Ok(StrategyHandles { power: p, cost: cp, contracts: handles })
}

pub fn build_og_block(model: &mut MilpModel, contracts: &[OgContract], horizon: usize, prefix: &str) -> Result<StrategyHandles> {
    let mut b = Block { model, prefix: prefix.to_string(), horizon };
    let mut power = vec![LinearExpr::new(); horizon];
    let mut cost = vec![LinearExpr::new(); horizon];
    let mut handles = Vec::new();
    for (i, c) in contracts.iter().enumerate() {
        check_og(c, i)?;
        let tag = format!("og{i}");
        let y = b.binaries(&format!("{tag}_y"))?;
        let t = b.nonneg(&format!("{tag}_t"))?;
        let sc = b.nonneg(&format!("{tag}_sc"))?;
        let sfc = b.nonneg(&format!("{tag}_sfc"))?;
        for h in 0..horizon {
            let mut rise = LinearExpr::from(y[h]);
            if h > 0 {
                rise.add_term(y[h - 1], -1.0);
            }
            b.row(format!("{tag}_startcost_{h}"), LinearExpr::from(sc[h]) - rise.clone() * c.startup_cost, Sense::Ge, 0.0)?;
            b.row(format!("{tag}_startfuel_{h}"), LinearExpr::from(sfc[h]) - rise.clone() * c.startup_fuel, Sense::Ge, 0.0)?;
            b.row(format!("{tag}_pmin_{h}"), LinearExpr::new().term(t[h], 1.0).term(y[h], -c.p_min), Sense::Ge, 0.0)?;
            b.row(format!("{tag}_pmax_{h}"), LinearExpr::new().term(t[h], 1.0).term(y[h], -c.p_max), Sense::Le, 0.0)?;
            if c.min_on > 1 {
                let len = c.min_on.min(horizon - h);
                let expr = (h..h + len).fold(rise.clone() * -(len as f64), |e, k| e.term(y[k], 1.0));
                b.row(format!("{tag}_minon_{h}"), expr, Sense::Ge, 0.0)?;
            }
            if h > 0 && c.min_off > 1 {
                // Σ (1 − Y_k) ≥ len·(Y_{h−1} − Y_h)
                let len = c.min_off.min(horizon - h);
                let mut expr = LinearExpr::new().term(y[h - 1], len as f64).term(y[h], -(len as f64));
                for k in h..h + len {
                    expr.add_term(y[k], 1.0);
                }
                b.row(format!("{tag}_minoff_{h}"), expr, Sense::Le, len as f64)?;
            }
            power[h].add_term(t[h], 1.0);
            cost[h].add_term(sc[h], 1.0);
            cost[h].add_term(t[h], c.price);
        }
        b.ramps(&tag, &t, c.ramp_up, c.ramp_down)?;
        let fuel = (0..horizon).fold(LinearExpr::new(), |e, h| e.term(t[h], c.fuel_factor).term(sfc[h], 1.0));
        b.row(format!("{tag}_fuel"), fuel, Sense::Le, c.fuel_limit)?;
        handles.push(ContractHandles { status: y, output: t, cost_aux: sc, fuel_aux: sfc, ..Default::default() });
    }
    let (p, cp) = b.aggregates("og", power, cost, false)?;
    Ok(StrategyHandles { power: p, cost: cp, contracts: handles })
}

pub fn build_es_block(model: &mut MilpModel, contracts: &[EsContract], horizon: usize, prefix: &str) -> Result<StrategyHandles> {
    let mut b = Block { model, prefix: prefix.to_string(), horizon };
    let mut power = vec![LinearExpr::new(); horizon];
    let mut cost = vec![LinearExpr::new(); horizon];
    let mut handles = Vec::new();
    for (i, c) in contracts.iter().enumerate() {
        check_es(c, i, horizon)?;
        let tag = format!("es{i}");
        let (y, f, w) = b.episodes(&tag, |_| true)?;
        let t = b.nonneg(&format!("{tag}_t"))?;
        for h in 0..horizon {
            b.row(format!("{tag}_rating_{h}"), LinearExpr::new().term(t[h], 1.0).term(y[h], -c.power_rating), Sense::Le, 0.0)?;
            power[h].add_term(t[h], 1.0);
            cost[h].add_term(t[h], c.price);
        }
        b.ramps(&tag, &t, c.ramp_up, c.ramp_down)?;
        let energy = t.iter().fold(LinearExpr::new(), |e, &v| e.term(v, 1.0));
        b.row(format!("{tag}_energy"), energy, Sense::Le, c.efficiency * c.energy_capacity)?;
        b.count(&tag, &f, c.max_cycles)?;
        b.max_duration(&tag, &y, &f, &w, c.retention_time)?;
        handles.push(ContractHandles { status: y, start: f, stop: w, output: t, ..Default::default() });
    }
    let (p, cp) = b.aggregates("es", power, cost, false)?;
    Ok(StrategyHandles { power: p, cost: cp, contracts: handles })
}

/// Installs all four blocks; variable and row names start with `prefix`.
pub fn build_dag_blocks(
    model: &mut MilpModel,
    contracts: &ContractSet,
    horizon: usize,
    prefix: &str,
    recovery: LsRecovery,
) -> Result<DagBlockHandles> {
    if horizon == 0 {
        return Err(VppError::ModelAssembly("horizon must be at least one hour".into()));
    }
    Ok(DagBlockHandles {
        horizon,
        lc: build_lc_block(model, &contracts.lc, horizon, prefix)?,
        ls: build_ls_block(model, &contracts.ls, horizon, prefix, recovery)?,
        og: build_og_block(model, &contracts.og, horizon, prefix)?,
        es: build_es_block(model, &contracts.es, horizon, prefix)?,
    })
}

/// Self-scheduling model: maximize `Σ_h ρ_h·ΣP_h − ΣCP_h`.
pub fn build_dag_model(contracts: &ContractSet, prices: &[f64], recovery: LsRecovery) -> Result<(MilpModel, DagBlockHandles)> {
    let mut model = MilpModel::new(Direction::Maximize);
    let handles = build_dag_blocks(&mut model, contracts, prices.len(), "", recovery)?;
    let mut objective = LinearExpr::new();
    for (h, &rho) in prices.iter().enumerate() {
        objective.add_expr(&handles.total_power(h), rho);
        objective.add_expr(&handles.total_cost(h), -1.0);
    }
    model.set_objective(objective)?;
    Ok((model, handles))
}

/// Realized operation of one contract.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractSchedule {
    pub status: Vec<bool>,
    pub start: Vec<bool>,
    pub stop: Vec<bool>,
    /// MW delivered each hour before any load recovery.
    pub output: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategySchedule {
    pub power: Vec<f64>,
    pub cost: Vec<f64>,
    pub contracts: Vec<ContractSchedule>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DagSchedule {
    pub lc: StrategySchedule,
    pub ls: StrategySchedule,
    pub og: StrategySchedule,
    pub es: StrategySchedule,
}

fn starts_of(status: &[bool]) -> Vec<bool> {
    status.iter().enumerate().map(|(h, &on)| on && (h == 0 || !status[h - 1])).collect()
}

fn stops_of(status: &[bool]) -> Vec<bool> {
    status.iter().enumerate().map(|(h, &on)| !on && h > 0 && status[h - 1]).collect()
}

impl DagSchedule {
    pub fn strategy(&self, s: Strategy) -> &StrategySchedule {
        match s {
            Strategy::Lc => &self.lc,
            Strategy::Ls => &self.ls,
            Strategy::Og => &self.og,
            Strategy::Es => &self.es,
        }
    }

    /// Reads a schedule out of a solution vector.
    pub fn from_values(values: &[f64], handles: &DagBlockHandles, contracts: &ContractSet) -> DagSchedule {
        let on = |ids: &[VarId]| -> Vec<bool> { ids.iter().map(|v| values[v.index()] > 0.5).collect() };
        let read = |ids: &[VarId]| -> Vec<f64> { ids.iter().map(|v| values[v.index()]).collect() };
        let strategy = |s: Strategy, h: &StrategyHandles| -> StrategySchedule {
            let contracts = h
                .contracts
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let status = on(&c.status);
                    let output = match s {
                        Strategy::Lc => status.iter().map(|&b| if b { contracts.lc[i].quantity } else { 0.0 }).collect(),
                        Strategy::Ls => status.iter().map(|&b| if b { contracts.ls[i].shifted() } else { 0.0 }).collect(),
                        Strategy::Og | Strategy::Es => read(&c.output),
                    };
                    let (start, stop) = if c.start.is_empty() {
                        (starts_of(&status), stops_of(&status))
                    } else {
                        (on(&c.start), on(&c.stop))
                    };
                    ContractSchedule { status, start, stop, output }
                })
                .collect();
            StrategySchedule { power: read(&h.power), cost: read(&h.cost), contracts }
        };
        DagSchedule {
            lc: strategy(Strategy::Lc, &handles.lc),
            ls: strategy(Strategy::Ls, &handles.ls),
            og: strategy(Strategy::Og, &handles.og),
            es: strategy(Strategy::Es, &handles.es),
        }
    }

    pub fn horizon(&self) -> usize {
        self.lc.power.len()
    }

    /// Hourly delivery recomputed from unit operation and contract data,
    /// including LS recovery.
    pub fn delivered_power(&self, contracts: &ContractSet, recovery: LsRecovery) -> Vec<f64> {
        let horizon = self.horizon();
        let mut p = vec![0.0; horizon];
        for s in Strategy::ALL {
            for c in &self.strategy(s).contracts {
                for (h, v) in c.output.iter().enumerate() {
                    p[h] += v;
                }
            }
        }
        if recovery == LsRecovery::Uniform {
            for (c, sched) in contracts.ls.iter().zip(&self.ls.contracts) {
                let shifted: f64 = sched.output.iter().sum();
                let share = shifted / c.recovery_window.len() as f64;
                for r in c.recovery_window.hours() {
                    p[r] -= share;
                }
            }
        }
        p
    }

    /// Hourly operating cost recomputed from unit operation and contract data.
    pub fn operating_cost(&self, contracts: &ContractSet) -> Vec<f64> {
        let horizon = self.horizon();
        let mut cost = vec![0.0; horizon];
        for (c, s) in contracts.lc.iter().zip(&self.lc.contracts) {
            for h in 0..horizon {
                cost[h] += c.initiation_cost * f64::from(u8::from(s.start[h])) + c.price * s.output[h];
            }
        }
        for (c, s) in contracts.ls.iter().zip(&self.ls.contracts) {
            for h in 0..horizon {
                cost[h] += c.initiation_cost * f64::from(u8::from(s.start[h])) + c.price * s.output[h];
            }
        }
        for (c, s) in contracts.og.iter().zip(&self.og.contracts) {
            for h in 0..horizon {
                cost[h] += c.startup_cost * f64::from(u8::from(s.start[h])) + c.price * s.output[h];
            }
        }
        for (c, s) in contracts.es.iter().zip(&self.es.contracts) {
            for h in 0..horizon {
                cost[h] += c.price * s.output[h];
            }
        }
        cost
    }
}

/// Solved self-schedule with its objective.
#[derive(Debug, Clone)]
pub struct DagResult {
    pub objective: f64,
    pub schedule: DagSchedule,
    pub gap: f64,
}

pub fn solve_dag_schedule(
    model: &MilpModel,
    handles: &DagBlockHandles,
    contracts: &ContractSet,
    options: &SolveOptions,
) -> Result<DagResult> {
    let sol = solve_milp(model, options);
    if sol.status != Status::Optimal {
        return Err(VppError::Solver { stage: "dag".into(), status: sol.status });
    }
    Ok(DagResult {
        objective: sol.objective,
        schedule: DagSchedule::from_values(&sol.values, handles, contracts),
        gap: sol.gap,
    })
}
