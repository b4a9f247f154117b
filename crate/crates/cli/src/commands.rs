use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use milp_core::{export_lp_file, SolveOptions};
use serde_json::json;
use vpp_core::contracts::{build_dag_model, solve_dag_schedule};
use vpp_core::dataset::{load_prices, write_synthetic_dataset, Dataset};
use vpp_core::offering::extract_offering_curves;
use vpp_core::probust::{
    build_probust_model, find_min_feasible_p, solve_probust, solve_scenario_optima, sweep_p, PGrid, ProbustResult,
    RegretKind, ScenarioOptimum, SweepReport,
};
use vpp_core::scenario::validate_tree;
use vpp_core::vpp::VppProblem;
use vpp_core::VppError;

use crate::error::{CliError, StageExt};
use crate::report::{self, DatasetInfo, Outputs, RunManifest, Timings};

/// Overrides of the dataset's solver settings.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub gap: Option<f64>,
}

fn load(config: &Path) -> Result<Dataset, CliError> {
    Dataset::load(config).stage("load")
}

fn solve_options(ds: &Dataset, run: &RunOptions) -> SolveOptions {
    SolveOptions {
        gap_tol: run.gap.unwrap_or(ds.config.solver.gap),
        node_limit: ds.config.solver.node_limit,
        ..SolveOptions::default()
    }
}

fn dataset_info(ds: &Dataset) -> DatasetInfo {
    DatasetInfo {
        name: ds.config.dataset.name.clone(),
        hash: ds.hash(),
        scenarios: ds.tree.len(),
        horizon: ds.tree.horizon,
    }
}

fn finish(
    out_dir: &Path,
    mut outputs: Outputs,
    command: &str,
    dataset: Option<DatasetInfo>,
    settings: serde_json::Value,
    timings: &Timings,
) -> Result<(), CliError> {
    let manifest = RunManifest {
        tool: "vpp",
        version: env!("CARGO_PKG_VERSION"),
        command: command.into(),
        dataset,
        settings,
        outputs: outputs.entries(),
    };
    outputs.add("manifest.json", manifest.to_json());
    outputs.add("timings.json", timings.to_json());
    outputs.write_all(out_dir)
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub dataset: DatasetInfo,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Loads the dataset (which runs the file, contract and marginal checks) and
/// then checks the assembled scenario tree.
pub fn cmd_validate(config: &Path) -> Result<ValidationReport, CliError> {
    let ds = load(config)?;
    Ok(ValidationReport { dataset: dataset_info(&ds), violations: validate_tree(&ds.tree) })
}

#[derive(Debug, Clone)]
pub struct DagOutcome {
    pub objective: f64,
    pub recosted: f64,
}

/// Self-schedules the contract portfolio against one price series; without
/// `prices` the expected day-ahead price of the dataset is used.
pub fn cmd_dag(config: &Path, prices: Option<&Path>, out_dir: &Path, run: &RunOptions) -> Result<DagOutcome, CliError> {
    let mut timings = Timings::default();
    let t = Instant::now();
    let ds = load(config)?;
    let prices = match prices {
        Some(p) => load_prices(p).stage("load prices")?,
        None => ds.expected_da_price(),
    };
    if prices.len() != ds.tree.horizon {
        return Err(CliError::Usage(format!("{} prices for a horizon of {} hours", prices.len(), ds.tree.horizon)));
    }
    timings.record("load", t);

    let t = Instant::now();
    let recovery = ds.config.model.ls_recovery;
    let contracts = &ds.assets.contracts;
    let (model, handles) = build_dag_model(contracts, &prices, recovery).stage("dag model")?;
    let result = solve_dag_schedule(&model, &handles, contracts, &solve_options(&ds, run)).stage("dag solve")?;
    timings.record("solve", t);

    let delivered = result.schedule.delivered_power(contracts, recovery);
    let cost = result.schedule.operating_cost(contracts);
    let recosted: f64 = prices.iter().zip(&delivered).map(|(p, q)| p * q).sum::<f64>() - cost.iter().sum::<f64>();
    if (recosted - result.objective).abs() > 1e-6 * result.objective.abs().max(1.0) {
        return Err(VppError::InternalInconsistency(format!(
            "schedule re-costs to {recosted}, solver objective {}",
            result.objective
        )))
        .stage("dag settlement");
    }

    let mut outputs = Outputs::default();
    outputs.add("dag_schedule.csv", report::dag_schedule(&prices, &result.schedule, &delivered, &cost));
    outputs.add("dag_units.csv", report::dag_units(&result.schedule));
    outputs.add(
        "dag_summary.csv",
        format!(
            "objective,recosted_objective,gap\n{},{},{}\n",
            report::fmt6(result.objective),
            report::fmt6(recosted),
            report::fmt6(result.gap)
        )
        .into_bytes(),
    );
    let settings = json!({ "gap": solve_options(&ds, run).gap_tol, "ls_recovery": ds.config.model.ls_recovery });
    finish(out_dir, outputs, "dag", Some(dataset_info(&ds)), settings, &timings)?;
    Ok(DagOutcome { objective: result.objective, recosted })
}

struct Prepared {
    ds: Dataset,
    problem: VppProblem,
    optima: Vec<ScenarioOptimum>,
    solve: SolveOptions,
}

fn prepare(config: &Path, run: &RunOptions, timings: &mut Timings) -> Result<Prepared, CliError> {
    let t = Instant::now();
    let ds = load(config)?;
    let problem = VppProblem::new(&ds.assets, &ds.tree, &ds.config.model).stage("model")?;
    timings.record("load", t);
    let t = Instant::now();
    let solve = solve_options(&ds, run);
    let optima = solve_scenario_optima(&ds.assets, &ds.tree, &ds.config.model, &solve).stage("scenario optima")?;
    timings.record("scenario optima", t);
    Ok(Prepared { ds, problem, optima, solve })
}

fn strategy_outputs(outputs: &mut Outputs, suffix: &str, result: &ProbustResult, prep: &Prepared) -> Result<(), CliError> {
    let Some(decision) = &result.decision else { return Ok(()) };
    let curves = extract_offering_curves(decision, &prep.ds.tree).stage("offering curves")?;
    outputs.add(format!("offer_curves{suffix}.csv"), report::curves(&curves));
    outputs.add(format!("participation{suffix}.csv"), report::participation(decision, &prep.ds.tree));
    outputs.add(format!("units{suffix}.csv"), report::units(decision));
    outputs.add(format!("profits{suffix}.csv"), report::profit_breakdown(&result.breakdowns, &prep.ds.tree));
    Ok(())
}

/// A single solve at regret limit `p` (`None` for the risk-neutral model).
pub fn cmd_solve(config: &Path, p: Option<f64>, out_dir: &Path, run: &RunOptions) -> Result<ProbustResult, CliError> {
    let mut timings = Timings::default();
    let prep = prepare(config, run, &mut timings)?;
    let t = Instant::now();
    let p = p.unwrap_or(f64::INFINITY);
    let result = solve_probust(&prep.problem, &prep.optima, p, &prep.solve).stage("p-robust solve")?;
    timings.record("solve", t);

    let mut outputs = Outputs::default();
    outputs.add("solve_summary.csv", report::results_summary(std::slice::from_ref(&result)));
    outputs.add("scenario_optima.csv", report::scenario_optima(&prep.optima, &prep.ds.tree));
    strategy_outputs(&mut outputs, "", &result, &prep)?;
    let settings = json!({ "gap": prep.solve.gap_tol, "p": report::p_label(p), "model": prep.ds.config.model });
    finish(out_dir, outputs, "solve", Some(dataset_info(&prep.ds)), settings, &timings)?;
    Ok(result)
}

/// Solves at `p` and writes only the hourly offering curves.
pub fn cmd_offer_curves(config: &Path, p: Option<f64>, out_dir: &Path, run: &RunOptions) -> Result<ProbustResult, CliError> {
    let mut timings = Timings::default();
    let prep = prepare(config, run, &mut timings)?;
    let t = Instant::now();
    let p = p.unwrap_or(f64::INFINITY);
    let result = solve_probust(&prep.problem, &prep.optima, p, &prep.solve).stage("p-robust solve")?;
    timings.record("solve", t);
    let Some(decision) = &result.decision else {
        return Err(CliError::Usage(format!("no feasible decision at p = {}", report::p_label(p))));
    };
    let curves = extract_offering_curves(decision, &prep.ds.tree).stage("offering curves")?;
    let mut outputs = Outputs::default();
    outputs.add("offer_curves.csv", report::curves(&curves));
    let settings = json!({ "gap": prep.solve.gap_tol, "p": report::p_label(p) });
    finish(out_dir, outputs, "offer-curves", Some(dataset_info(&prep.ds)), settings, &timings)?;
    Ok(result)
}

/// The p values a sweep visits.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// Dataset default: `steps` equal steps from the risk-neutral regret to 0.
    Auto { steps: Option<usize> },
    Linear { start: f64, step: f64, stop: f64 },
    List(Vec<f64>),
}

impl GridSpec {
    fn resolve(&self, ds: &Dataset) -> PGrid {
        match self {
            GridSpec::Auto { steps } => PGrid::FromRiskNeutral { steps: steps.unwrap_or(ds.config.sweep.steps) },
            GridSpec::Linear { start, step, stop } => PGrid::Linear { start: *start, step: *step, stop: *stop },
            GridSpec::List(v) => PGrid::Explicit(v.clone()),
        }
    }

    fn describe(&self, ds: &Dataset) -> serde_json::Value {
        match self.resolve(ds) {
            PGrid::FromRiskNeutral { steps } => json!({ "from_risk_neutral": steps }),
            PGrid::Linear { start, step, stop } => json!({ "start": start, "step": step, "stop": stop }),
            PGrid::Explicit(v) => json!({ "list": v }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub report: SweepReport,
    pub p_min_bisection: Option<f64>,
}

/// Risk-neutral solve, the p grid, and the reports built from them.
pub fn cmd_sweep(
    config: &Path,
    grid: &GridSpec,
    bisect: bool,
    out_dir: &Path,
    run: &RunOptions,
) -> Result<SweepOutcome, CliError> {
    let mut timings = Timings::default();
    let prep = prepare(config, run, &mut timings)?;
    let t = Instant::now();
    let report = sweep_p(&prep.problem, &prep.optima, &grid.resolve(&prep.ds), &prep.solve).stage("sweep")?;
    timings.record("sweep", t);
    let p_min_bisection = if bisect {
        let t = Instant::now();
        let tol = prep.ds.config.sweep.bisection_tol;
        let p = find_min_feasible_p(&prep.problem, &prep.optima, tol, &prep.solve).stage("bisection")?;
        timings.record("bisection", t);
        Some(p)
    } else {
        None
    };

    let mut outputs = Outputs::default();
    outputs.add("profits_by_scenario.csv", report::profits_by_scenario(&report));
    outputs.add("mrr_vs_profit.csv", report::mrr_vs_profit(&report));
    outputs.add("sweep_summary.csv", report::results_summary(&report.results));
    outputs.add("scenario_optima.csv", report::scenario_optima(&report.optima, &prep.ds.tree));
    let mut p_min = String::from("method,p_min\n");
    p_min.push_str(&format!("grid,{}\n", report.p_min.map_or(String::new(), report::fmt6)));
    if let Some(p) = p_min_bisection {
        p_min.push_str(&format!("bisection,{}\n", report::fmt6(p)));
    }
    outputs.add("p_min.csv", p_min.into_bytes());
    strategy_outputs(&mut outputs, "_risk_neutral", report.risk_neutral(), &prep)?;
    if let Some(averse) = report.risk_averse() {
        strategy_outputs(&mut outputs, "_risk_averse", averse, &prep)?;
    }
    let settings = json!({
        "gap": prep.solve.gap_tol,
        "node_limit": prep.solve.node_limit,
        "grid": grid.describe(&prep.ds),
        "bisection_tol": if bisect { Some(prep.ds.config.sweep.bisection_tol) } else { None },
        "model": prep.ds.config.model,
    });
    finish(out_dir, outputs, "sweep", Some(dataset_info(&prep.ds)), settings, &timings)?;
    Ok(SweepOutcome { report, p_min_bisection })
}

/// Which model `export-lp` writes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSelector {
    Dag,
    Vpp,
    Probust(f64),
}

impl FromStr for ModelSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dag" => Ok(ModelSelector::Dag),
            "vpp" => Ok(ModelSelector::Vpp),
            _ => {
                let p = s
                    .strip_prefix("probust@")
                    .ok_or_else(|| format!("unknown model `{s}` (expected dag, vpp or probust@<p>)"))?;
                let p = match p {
                    "inf" | "+inf" => f64::INFINITY,
                    _ => p.parse::<f64>().map_err(|e| format!("bad p in `{s}`: {e}"))?,
                };
                if !(p >= 0.0) {
                    return Err(format!("p must be >= 0 in `{s}`"));
                }
                Ok(ModelSelector::Probust(p))
            }
        }
    }
}

impl fmt::Display for ModelSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSelector::Dag => f.write_str("dag"),
            ModelSelector::Vpp => f.write_str("vpp"),
            ModelSelector::Probust(p) => write!(f, "probust@{}", report::p_label(*p)),
        }
    }
}

/// Writes the selected model in CPLEX LP format.
pub fn cmd_export_lp(
    config: &Path,
    which: ModelSelector,
    prices: Option<&Path>,
    out_path: &Path,
    run: &RunOptions,
) -> Result<(), CliError> {
    let ds = load(config)?;
    let model = match which {
        ModelSelector::Dag => {
            let prices = match prices {
                Some(p) => load_prices(p).stage("load prices")?,
                None => ds.expected_da_price(),
            };
            build_dag_model(&ds.assets.contracts, &prices, ds.config.model.ls_recovery).stage("dag model")?.0
        }
        ModelSelector::Vpp => VppProblem::new(&ds.assets, &ds.tree, &ds.config.model).stage("model")?.model,
        ModelSelector::Probust(p) => {
            let problem = VppProblem::new(&ds.assets, &ds.tree, &ds.config.model).stage("model")?;
            let optima = if p.is_finite() {
                solve_scenario_optima(&ds.assets, &ds.tree, &ds.config.model, &solve_options(&ds, run))
                    .stage("scenario optima")?
            } else {
                (0..ds.tree.len()).map(|f| ScenarioOptimum { scenario: f, value: f64::NAN }).collect()
            };
            build_probust_model(&problem, &optima, p, RegretKind::Relative).stage("p-robust model")?
        }
    };
    if let Some(dir) = out_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.to_path_buf(), source })?;
    }
    std::fs::write(out_path, export_lp_file(&model)).map_err(|source| CliError::Write { path: out_path.to_path_buf(), source })
}

/// Writes the synthetic dataset and returns its config path.
pub fn cmd_generate(out_dir: &Path, seed: u64) -> Result<PathBuf, CliError> {
    write_synthetic_dataset(out_dir, seed).stage("generate")
}
