//! CSV and JSON artifacts. Every number is written with six decimals so that
//! reruns produce identical bytes.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use vpp_core::contracts::{DagSchedule, Strategy};
use vpp_core::offering::{write_curves_csv, OfferingCurve};
use vpp_core::probust::{ProbustResult, ScenarioOptimum, SweepReport};
use vpp_core::scenario::ScenarioTree;
use vpp_core::vpp::{ProfitBreakdown, VppDecision};

use crate::error::CliError;

pub const INFEASIBLE: &str = "infeasible";

/// Six decimals, with negative zero printed as zero.
pub fn fmt6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

pub fn p_label(p: f64) -> String {
    if p.is_infinite() {
        "+inf".into()
    } else {
        fmt6(p)
    }
}

fn table(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv write");
    for r in rows {
        w.write_record(r).expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Rows are p values (risk-neutral first), columns scenarios; the first
/// infeasible point closes the table.
pub fn profits_by_scenario(report: &SweepReport) -> Vec<u8> {
    let n = report.optima.len();
    let mut header = vec!["p".to_string()];
    header.extend((1..=n).map(|f| format!("S{f}")));
    let rows: Vec<Vec<String>> = report
        .results
        .iter()
        .map(|r| {
            let mut row = vec![p_label(r.p)];
            if r.is_feasible() {
                row.extend(r.profits.iter().map(|&z| fmt6(z)));
            } else {
                row.extend(std::iter::repeat(INFEASIBLE.to_string()).take(n));
            }
            row
        })
        .collect();
    table(&header, &rows)
}

/// Regret and expected income per p, with reductions relative to the
/// risk-neutral row in percent.
pub fn mrr_vs_profit(report: &SweepReport) -> Vec<u8> {
    let header = strings(&["p", "mrr_pct", "mrr_reduction_pct", "expected_income", "income_reduction_pct"]);
    let base = report.risk_neutral();
    let reduction = |from: f64, to: f64| if from == 0.0 { 0.0 } else { (from - to) / from * 100.0 };
    let rows: Vec<Vec<String>> = report
        .results
        .iter()
        .map(|r| {
            if r.is_feasible() {
                vec![
                    p_label(r.p),
                    fmt6(r.mrr * 100.0),
                    fmt6(reduction(base.mrr, r.mrr)),
                    fmt6(r.expected_profit),
                    fmt6(reduction(base.expected_profit, r.expected_profit)),
                ]
            } else {
                let mut row = vec![p_label(r.p)];
                row.extend(std::iter::repeat(INFEASIBLE.to_string()).take(4));
                row
            }
        })
        .collect();
    table(&header, &rows)
}

pub fn results_summary(results: &[ProbustResult]) -> Vec<u8> {
    let header = strings(&["p", "status", "expected_profit", "mrr", "lb", "ub", "solver_objective", "gap", "nodes"]);
    let num = |x: f64| if x.is_nan() { String::new() } else if x.is_infinite() { format!("{}inf", if x < 0.0 { "-" } else { "+" }) } else { fmt6(x) };
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                p_label(r.p),
                if r.is_feasible() { "optimal".into() } else { INFEASIBLE.into() },
                num(r.expected_profit),
                num(r.mrr),
                num(r.lb),
                num(r.ub),
                num(r.solver_objective),
                num(r.gap),
                r.nodes.to_string(),
            ]
        })
        .collect();
    table(&header, &rows)
}

pub fn scenario_optima(optima: &[ScenarioOptimum], tree: &ScenarioTree) -> Vec<u8> {
    let header = strings(&["scenario", "probability", "optimum"]);
    let rows: Vec<Vec<String>> = optima
        .iter()
        .map(|o| vec![(o.scenario + 1).to_string(), fmt6(tree.scenarios[o.scenario].probability), fmt6(o.value)])
        .collect();
    table(&header, &rows)
}

/// Settlement terms per scenario.
pub fn profit_breakdown(breakdowns: &[ProfitBreakdown], tree: &ScenarioTree) -> Vec<u8> {
    let header = strings(&[
        "scenario",
        "probability",
        "da_revenue",
        "id_revenue",
        "positive_imbalance_revenue",
        "negative_imbalance_cost",
        "component_cost",
        "total",
    ]);
    let rows: Vec<Vec<String>> = breakdowns
        .iter()
        .enumerate()
        .map(|(n, b)| {
            vec![
                (n + 1).to_string(),
                fmt6(tree.scenarios[n].probability),
                fmt6(b.da_revenue),
                fmt6(b.id_revenue),
                fmt6(b.positive_imbalance_revenue),
                fmt6(b.negative_imbalance_cost),
                fmt6(b.component_cost),
                fmt6(b.total),
            ]
        })
        .collect();
    table(&header, &rows)
}

/// Hourly market positions and component deliveries per scenario.
pub fn participation(decision: &VppDecision, tree: &ScenarioTree) -> Vec<u8> {
    let header = strings(&[
        "scenario", "hour", "wind", "da_price", "id_price", "da", "id", "sc", "eps_plus", "eps_minus", "lc", "ls", "og",
        "es",
    ]);
    let mut rows = Vec::new();
    for (n, (s, d)) in tree.scenarios.iter().zip(&decision.scenarios).enumerate() {
        for h in 0..tree.horizon {
            let mut row = vec![
                (n + 1).to_string(),
                (h + 1).to_string(),
                fmt6(s.wind[h]),
                fmt6(s.da_price[h]),
                fmt6(s.id_price[h]),
                fmt6(d.da[h]),
                fmt6(d.id[h]),
                fmt6(d.sc[h]),
                fmt6(d.eps_plus[h]),
                fmt6(d.eps_minus[h]),
            ];
            row.extend(Strategy::ALL.iter().map(|&st| fmt6(d.components.strategy(st).power[h])));
            rows.push(row);
        }
    }
    table(&header, &rows)
}

fn unit_rows(prefix: &[String], schedule: &DagSchedule, rows: &mut Vec<Vec<String>>) {
    for st in Strategy::ALL {
        for (c, sched) in schedule.strategy(st).contracts.iter().enumerate() {
            for h in 0..sched.status.len() {
                let mut row = prefix.to_vec();
                row.extend([
                    st.label().to_string(),
                    (c + 1).to_string(),
                    (h + 1).to_string(),
                    u8::from(sched.status[h]).to_string(),
                    u8::from(sched.start[h]).to_string(),
                    u8::from(sched.stop[h]).to_string(),
                    fmt6(sched.output[h]),
                ]);
                rows.push(row);
            }
        }
    }
}

const UNIT_COLUMNS: [&str; 7] = ["strategy", "contract", "hour", "status", "start", "stop", "output"];

/// Contract-level operation, one block per component branch.
pub fn units(decision: &VppDecision) -> Vec<u8> {
    let mut header = vec!["branch".to_string()];
    header.extend(strings(&UNIT_COLUMNS));
    let mut rows = Vec::new();
    let mut seen = Vec::new();
    for d in &decision.scenarios {
        if seen.contains(&d.branch) {
            continue;
        }
        seen.push(d.branch);
        unit_rows(&[(d.branch + 1).to_string()], &d.components, &mut rows);
    }
    table(&header, &rows)
}

pub fn dag_units(schedule: &DagSchedule) -> Vec<u8> {
    let mut rows = Vec::new();
    unit_rows(&[], schedule, &mut rows);
    table(&strings(&UNIT_COLUMNS), &rows)
}

/// Hourly power and cost per strategy next to the price.
pub fn dag_schedule(prices: &[f64], schedule: &DagSchedule, delivered: &[f64], cost: &[f64]) -> Vec<u8> {
    let mut header = strings(&["hour", "price"]);
    for st in Strategy::ALL {
        let l = st.label().to_lowercase();
        header.push(format!("{l}_power"));
        header.push(format!("{l}_cost"));
    }
    header.extend(strings(&["delivered", "cost"]));
    let rows: Vec<Vec<String>> = (0..prices.len())
        .map(|h| {
            let mut row = vec![(h + 1).to_string(), fmt6(prices[h])];
            for st in Strategy::ALL {
                let s = schedule.strategy(st);
                row.push(fmt6(s.power[h]));
                row.push(fmt6(s.cost[h]));
            }
            row.push(fmt6(delivered[h]));
            row.push(fmt6(cost[h]));
            row
        })
        .collect();
    table(&header, &rows)
}

pub fn curves(curves: &[OfferingCurve]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_curves_csv(curves, &mut buf).expect("in-memory csv write");
    buf
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Files produced by one command, written together.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn entries(&self) -> Vec<OutputEntry> {
        self.files
            .iter()
            .map(|(file, bytes)| OutputEntry {
                file: file.clone(),
                bytes: bytes.len(),
                sha256: hex::encode(Sha256::digest(bytes)),
            })
            .collect()
    }

    pub fn write_all(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.to_path_buf(), source })?;
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|source| CliError::Write { path, source })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetInfo {
    pub name: String,
    pub hash: String,
    pub scenarios: usize,
    pub horizon: usize,
}

/// Everything needed to tell whether two runs should agree; no timings.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub dataset: Option<DatasetInfo>,
    pub settings: serde_json::Value,
    pub outputs: Vec<OutputEntry>,
}

impl RunManifest {
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("manifest serializes");
        out.push(b'\n');
        out
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub stages: Vec<StageTiming>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

impl Timings {
    pub fn record(&mut self, stage: &str, started: std::time::Instant) {
        self.stages.push(StageTiming { stage: stage.into(), seconds: started.elapsed().as_secs_f64() });
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("timings serialize");
        out.push(b'\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_decimals() {
        assert_eq!(fmt6(1.0 / 3.0), "0.333333");
        assert_eq!(fmt6(-1e-9), "0.000000");
        assert_eq!(p_label(f64::INFINITY), "+inf");
    }
}
