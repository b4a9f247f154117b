//! Feasibility checks that work from contract data and a finished schedule or
//! decision, without looking at the optimization model.

use std::fmt;

use crate::contracts::{ContractSchedule, ContractSet, DagSchedule, LsRecovery, Strategy, StrategySchedule};
use crate::scenario::ScenarioTree;
use crate::vpp::{prices_equal, IdNonanticipativity, VppAssets, VppDecision, VppOptions};

/// One broken rule and by how much it is broken.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: String,
    pub excess: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (off by {:.3e})", self.rule, self.excess)
    }
}

struct Report {
    tol: f64,
    out: Vec<Violation>,
}

impl Report {
    fn le(&mut self, lhs: f64, rhs: f64, rule: impl FnOnce() -> String) {
        let excess = lhs - rhs;
        if !(excess <= self.tol) {
            self.out.push(Violation { rule: rule(), excess });
        }
    }

    fn eq(&mut self, lhs: f64, rhs: f64, rule: impl FnOnce() -> String) {
        let excess = (lhs - rhs).abs();
        if !(excess <= self.tol) {
            self.out.push(Violation { rule: rule(), excess });
        }
    }

    fn fail(&mut self, rule: String) {
        self.out.push(Violation { rule, excess: f64::INFINITY });
    }
}

/// Maximal runs of consecutive `true` hours as `(first, length)`.
fn runs(status: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut h = 0;
    while h < status.len() {
        if status[h] {
            let first = h;
            while h < status.len() && status[h] {
                h += 1;
            }
            out.push((first, h - first));
        } else {
            h += 1;
        }
    }
    out
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn check_shape(r: &mut Report, at: &str, sched: &ContractSchedule, horizon: usize) -> bool {
    let ok = [sched.status.len(), sched.start.len(), sched.stop.len(), sched.output.len()]
        .iter()
        .all(|&l| l == horizon);
    if !ok {
        r.fail(format!("{at}: series lengths differ from the {horizon} h horizon"));
    }
    ok
}

/// Start and stop flags follow the status changes, never both in one hour,
/// nothing stops in the first hour.
fn check_transitions(r: &mut Report, at: &str, sched: &ContractSchedule) {
    for h in 0..sched.status.len() {
        let prev = if h == 0 { 0.0 } else { flag(sched.status[h - 1]) };
        let change = flag(sched.status[h]) - prev;
        r.eq(flag(sched.start[h]) - flag(sched.stop[h]), change, || format!("{at} hour {}: start - stop != status change", h + 1));
        r.le(flag(sched.start[h]) + flag(sched.stop[h]), 1.0, || format!("{at} hour {}: start and stop together", h + 1));
    }
}

fn check_run_lengths(r: &mut Report, at: &str, status: &[bool], min: usize, max: usize) {
    for (first, len) in runs(status) {
        r.le(min as f64, len as f64, || format!("{at}: run from hour {} lasts {len} h, below {min} h", first + 1));
        r.le(len as f64, max as f64, || format!("{at}: run from hour {} lasts {len} h, above {max} h", first + 1));
    }
}

fn check_ramps(r: &mut Report, at: &str, output: &[f64], up: f64, down: f64) {
    for h in 0..output.len() {
        let prev = if h == 0 { 0.0 } else { output[h - 1] };
        r.le(output[h] - prev, up, || format!("{at} hour {}: ramp up", h + 1));
        if h > 0 {
            r.le(prev - output[h], down, || format!("{at} hour {}: ramp down", h + 1));
        }
    }
}

fn starts(s: &ContractSchedule) -> f64 {
    s.start.iter().map(|&b| flag(b)).sum()
}

/// Checks a component schedule against every contract rule plus the hourly
/// delivery and cost totals. Violations larger than `tol` are returned.
pub fn check_dag_schedule(contracts: &ContractSet, schedule: &DagSchedule, recovery: LsRecovery, tol: f64) -> Vec<Violation> {
    let mut r = Report { tol, out: Vec::new() };
    let horizon = schedule.lc.power.len();
    let counts = [
        (Strategy::Lc, contracts.lc.len()),
        (Strategy::Ls, contracts.ls.len()),
        (Strategy::Og, contracts.og.len()),
        (Strategy::Es, contracts.es.len()),
    ];
    for (st, n) in counts {
        let s = schedule.strategy(st);
        if s.contracts.len() != n || s.power.len() != horizon || s.cost.len() != horizon {
            r.fail(format!("{st}: schedule does not match {n} contracts over {horizon} h"));
            return r.out;
        }
        for (i, c) in s.contracts.iter().enumerate() {
            if !check_shape(&mut r, &format!("{st} {}", i + 1), c, horizon) {
                return r.out;
            }
        }
    }

    let mut power = [vec![0.0; horizon], vec![0.0; horizon], vec![0.0; horizon], vec![0.0; horizon]];
    let mut cost = [vec![0.0; horizon], vec![0.0; horizon], vec![0.0; horizon], vec![0.0; horizon]];

    for (i, (c, s)) in contracts.lc.iter().zip(&schedule.lc.contracts).enumerate() {
        let at = format!("LC {}", i + 1);
        check_transitions(&mut r, &at, s);
        check_run_lengths(&mut r, &at, &s.status, c.min_duration, c.max_duration);
        r.le(starts(s), c.max_daily_curtailments as f64, || format!("{at}: too many curtailments"));
        for h in 0..horizon {
            let y = flag(s.status[h]);
            r.eq(s.output[h], c.quantity * y, || format!("{at} hour {}: output != quantity x status", h + 1));
            power[0][h] += c.quantity * y;
            cost[0][h] += c.initiation_cost * flag(s.start[h]) + c.price * c.quantity * y;
        }
    }

    for (i, (c, s)) in contracts.ls.iter().zip(&schedule.ls.contracts).enumerate() {
        let at = format!("LS {}", i + 1);
        check_transitions(&mut r, &at, s);
        check_run_lengths(&mut r, &at, &s.status, c.min_duration, c.max_duration);
        let q = c.quantity * c.shift_fraction;
        let mut shifted = 0.0;
        for h in 0..horizon {
            let y = flag(s.status[h]);
            if s.status[h] && !c.reduction_window.contains(h) {
                r.fail(format!("{at} hour {}: active outside reduction window {}", h + 1, c.reduction_window));
            }
            r.eq(s.output[h], q * y, || format!("{at} hour {}: output != shifted quantity x status", h + 1));
            power[1][h] += q * y;
            cost[1][h] += c.initiation_cost * flag(s.start[h]) + c.price * q * y;
            shifted += q * y;
        }
        if recovery == LsRecovery::Uniform {
            let len = c.recovery_window.len() as f64;
            for h in c.recovery_window.hours() {
                power[1][h] -= shifted / len;
            }
        }
    }

    for (i, (c, s)) in contracts.og.iter().zip(&schedule.og.contracts).enumerate() {
        let at = format!("OG {}", i + 1);
        check_transitions(&mut r, &at, s);
        for h in 0..horizon {
            let y = flag(s.status[h]);
            r.le(c.p_min * y, s.output[h], || format!("{at} hour {}: below minimum output", h + 1));
            r.le(s.output[h], c.p_max * y, || format!("{at} hour {}: above maximum output", h + 1));
            power[2][h] += s.output[h];
            cost[2][h] += c.startup_cost * flag(s.start[h]) + c.price * s.output[h];
        }
        check_ramps(&mut r, &at, &s.output, c.ramp_up, c.ramp_down);
        for (first, len) in runs(&s.status) {
            let need = c.min_on.min(horizon - first);
            r.le(need as f64, len as f64, || format!("{at}: on for {len} h from hour {}, minimum {}", first + 1, c.min_on));
        }
        let off: Vec<bool> = s.status.iter().map(|&b| !b).collect();
        for (first, len) in runs(&off) {
            if first == 0 {
                continue;
            }
            let need = c.min_off.min(horizon - first);
            r.le(need as f64, len as f64, || format!("{at}: off for {len} h from hour {}, minimum {}", first + 1, c.min_off));
        }
        let fuel: f64 = s.output.iter().map(|t| c.fuel_factor * t).sum::<f64>() + c.startup_fuel * starts(s);
        r.le(fuel, c.fuel_limit, || format!("{at}: fuel {fuel} above limit {}", c.fuel_limit));
    }

    for (i, (c, s)) in contracts.es.iter().zip(&schedule.es.contracts).enumerate() {
        let at = format!("ES {}", i + 1);
        check_transitions(&mut r, &at, s);
        check_run_lengths(&mut r, &at, &s.status, 1, c.retention_time);
        r.le(starts(s), c.max_cycles as f64, || format!("{at}: too many cycles"));
        for h in 0..horizon {
            r.le(0.0, s.output[h], || format!("{at} hour {}: negative discharge", h + 1));
            r.le(s.output[h], c.power_rating * flag(s.status[h]), || format!("{at} hour {}: above power rating", h + 1));
            power[3][h] += s.output[h];
            cost[3][h] += c.price * s.output[h];
        }
        check_ramps(&mut r, &at, &s.output, c.ramp_up, c.ramp_down);
        let energy: f64 = s.output.iter().sum();
        r.le(energy, c.efficiency * c.energy_capacity, || format!("{at}: discharged {energy} MWh above budget"));
    }

    for (k, st) in Strategy::ALL.iter().enumerate() {
        let s: &StrategySchedule = schedule.strategy(*st);
        for h in 0..horizon {
            r.eq(s.power[h], power[k][h], || format!("{st} hour {}: power total", h + 1));
            r.eq(s.cost[h], cost[k][h], || format!("{st} hour {}: cost total", h + 1));
        }
    }
    r.out
}

/// Hourly delivery of a component schedule, rebuilt from contract data.
fn delivery(contracts: &ContractSet, schedule: &DagSchedule, recovery: LsRecovery) -> Vec<f64> {
    let horizon = schedule.lc.power.len();
    let mut p = vec![0.0; horizon];
    for (c, s) in contracts.lc.iter().zip(&schedule.lc.contracts) {
        for h in 0..horizon {
            p[h] += c.quantity * flag(s.status[h]);
        }
    }
    for (c, s) in contracts.ls.iter().zip(&schedule.ls.contracts) {
        let q = c.quantity * c.shift_fraction;
        let active: f64 = s.status.iter().map(|&b| flag(b)).sum();
        for h in 0..horizon {
            p[h] += q * flag(s.status[h]);
        }
        if recovery == LsRecovery::Uniform {
            for h in c.recovery_window.hours() {
                p[h] -= q * active / c.recovery_window.len() as f64;
            }
        }
    }
    for s in schedule.og.contracts.iter().chain(&schedule.es.contracts) {
        for h in 0..horizon {
            p[h] += s.output[h];
        }
    }
    p
}

/// Checks a stochastic decision: market positions, deviations, intraday and
/// component sharing, day-ahead offer monotonicity, and every component
/// schedule.
pub fn check_vpp_decision(
    assets: &VppAssets,
    tree: &ScenarioTree,
    options: &VppOptions,
    decision: &VppDecision,
    tol: f64,
) -> Vec<Violation> {
    let mut r = Report { tol, out: Vec::new() };
    let horizon = tree.horizon;
    if decision.scenarios.len() != tree.len() {
        r.fail(format!("{} scenario decisions for {} scenarios", decision.scenarios.len(), tree.len()));
        return r.out;
    }
    for (n, d) in decision.scenarios.iter().enumerate() {
        let lens = [d.da.len(), d.id.len(), d.sc.len(), d.eps_plus.len(), d.eps_minus.len()];
        if lens.iter().any(|&l| l != horizon) {
            r.fail(format!("scenario {}: series lengths differ from the {horizon} h horizon", n + 1));
            return r.out;
        }
    }

    let cap = assets.max_offer();
    let short_cap = assets.wind_capacity + assets.expansion_cap;
    for (n, (s, d)) in tree.scenarios.iter().zip(&decision.scenarios).enumerate() {
        let at = format!("scenario {}", n + 1);
        let component_violations = check_dag_schedule(&assets.contracts, &d.components, options.ls_recovery, tol);
        r.out.extend(component_violations.into_iter().map(|v| Violation { rule: format!("{at}: {}", v.rule), ..v }));
        if d.components.lc.power.len() != horizon {
            continue;
        }
        let delivered = delivery(&assets.contracts, &d.components, options.ls_recovery);
        for h in 0..horizon {
            let hr = h + 1;
            r.le(0.0, d.da[h], || format!("{at} hour {hr}: negative day-ahead offer"));
            r.le(d.da[h], cap, || format!("{at} hour {hr}: day-ahead offer above capacity"));
            r.le(0.0, d.id[h], || format!("{at} hour {hr}: negative intraday offer"));
            r.le(0.0, d.sc[h], || format!("{at} hour {hr}: negative schedule"));
            r.le(d.sc[h], cap, || format!("{at} hour {hr}: schedule above capacity"));
            r.eq(d.sc[h], d.da[h] + d.id[h], || format!("{at} hour {hr}: schedule != day-ahead + intraday"));
            r.le(0.0, d.eps_plus[h], || format!("{at} hour {hr}: negative surplus"));
            r.le(0.0, d.eps_minus[h], || format!("{at} hour {hr}: negative shortfall"));
            let produced = s.wind[h] + delivered[h];
            r.eq(d.eps_plus[h] - d.eps_minus[h], produced - d.sc[h], || format!("{at} hour {hr}: deviation identity"));
            r.le(d.eps_plus[h], produced, || format!("{at} hour {hr}: surplus above production"));
            r.le(d.eps_minus[h], short_cap, || format!("{at} hour {hr}: shortfall above cap"));
        }
    }

    for a in 0..tree.len() {
        for b in a + 1..tree.len() {
            let (sa, sb) = (&tree.scenarios[a], &tree.scenarios[b]);
            let (da, db) = (&decision.scenarios[a], &decision.scenarios[b]);
            let same_branch = sa.da_branch == sb.da_branch && sa.id_branch == sb.id_branch;
            if same_branch {
                if da.components != db.components {
                    r.fail(format!("scenarios {} and {} share a price branch but not a component schedule", a + 1, b + 1));
                }
                if options.id_nonanticipativity == IdNonanticipativity::Branch {
                    for h in 0..horizon {
                        r.eq(da.id[h], db.id[h], || format!("scenarios {} and {} hour {}: intraday offers differ", a + 1, b + 1, h + 1));
                    }
                }
            }
            for h in 0..horizon {
                let (pa, pb) = (sa.da_price[h], sb.da_price[h]);
                let rule = || format!("scenarios {} and {} hour {}: day-ahead offer order", a + 1, b + 1, h + 1);
                if prices_equal(pa, pb) {
                    r.eq(da.da[h], db.da[h], rule);
                } else if pa < pb {
                    r.le(da.da[h], db.da[h], rule);
                } else {
                    r.le(db.da[h], da.da[h], rule);
                }
            }
        }
    }
    r.out
}
