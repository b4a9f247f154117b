//! Dataset files: a TOML config that points at CSV contract tables and
//! marginal scenario series, plus the seeded synthetic dataset generator.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::contracts::{ContractSet, EsContract, HourWindow, LcContract, LsContract, OgContract};
use crate::error::{Result, VppError};
use crate::scenario::{
    build_symmetric_tree, check_probabilities, expand_balancing_ratios, BalancingBranch, BalancingDraw, MarginalScenarios, Regime,
    ScenarioTree, WeightedSeries,
};
use crate::vpp::{VppAssets, VppOptions};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    pub dataset: DatasetSection,
    pub assets: AssetsSection,
    #[serde(default)]
    pub contracts: ContractFiles,
    pub scenarios: ScenarioFiles,
    #[serde(default)]
    pub model: VppOptions,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub name: String,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetsSection {
    pub wind_capacity: f64,
    pub expansion_cap: f64,
}

/// Contract tables; a missing entry means no contracts of that type.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractFiles {
    pub lc: Option<PathBuf>,
    pub ls: Option<PathBuf>,
    pub og: Option<PathBuf>,
    pub es: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFiles {
    pub wind: PathBuf,
    pub da_price: PathBuf,
    pub id_price: PathBuf,
    pub balancing: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Relative MIP gap.
    pub gap: f64,
    pub node_limit: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection { gap: 1e-6, node_limit: 200_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Grid points between the risk-neutral regret and zero.
    pub steps: usize,
    /// Resolution of the minimum-feasible-p bisection.
    pub bisection_tol: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { steps: 20, bisection_tol: 1e-3 }
    }
}

/// A loaded and validated dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub config: Config,
    pub assets: VppAssets,
    pub marginals: MarginalScenarios,
    pub tree: ScenarioTree,
    /// Every input file with its bytes, config first, for hashing.
    pub files: Vec<(String, Vec<u8>)>,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| VppError::Io { path: path.to_path_buf(), source })
}

fn parse_err(path: &Path, message: impl Into<String>) -> VppError {
    VppError::Parse { path: path.to_path_buf(), message: message.into() }
}

fn read_csv<T: DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| parse_err(path, e.to_string()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeriesRow {
    branch: usize,
    hour: usize,
    value: f64,
    probability: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IdRow {
    da_branch: usize,
    branch: usize,
    hour: usize,
    value: f64,
    probability: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BalancingRow {
    branch: usize,
    #[serde(default)]
    hour: Option<usize>,
    regime: Regime,
    ratio: f64,
    probability: f64,
}

/// One value per (branch, hour) with a branch-level probability.
fn assemble_series(
    path: &Path,
    horizon: usize,
    rows: impl Iterator<Item = (usize, usize, f64, f64)>,
) -> Result<Vec<WeightedSeries>> {
    let mut branches: BTreeMap<usize, (f64, Vec<Option<f64>>)> = BTreeMap::new();
    for (branch, hour, value, probability) in rows {
        if branch == 0 {
            return Err(parse_err(path, "branches are numbered from 1"));
        }
        if hour == 0 || hour > horizon {
            return Err(parse_err(path, format!("branch {branch}: hour {hour} outside 1..={horizon}")));
        }
        let entry = branches.entry(branch).or_insert_with(|| (probability, vec![None; horizon]));
        if entry.0 != probability {
            return Err(parse_err(path, format!("branch {branch}: inconsistent probability {probability} vs {}", entry.0)));
        }
        if entry.1[hour - 1].replace(value).is_some() {
            return Err(parse_err(path, format!("branch {branch}: hour {hour} given twice")));
        }
    }
    let mut out = Vec::with_capacity(branches.len());
    for (k, (branch, (probability, values))) in branches.into_iter().enumerate() {
        if branch != k + 1 {
            return Err(parse_err(path, format!("branch {} missing", k + 1)));
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(h, v)| v.ok_or_else(|| parse_err(path, format!("branch {branch}: hour {} missing", h + 1))))
            .collect::<Result<Vec<_>>>()?;
        out.push(WeightedSeries::new(probability, values));
    }
    if out.is_empty() {
        return Err(parse_err(path, "no rows"));
    }
    Ok(out)
}

fn assemble_balancing(path: &Path, horizon: usize, rows: Vec<BalancingRow>) -> Result<Vec<BalancingBranch>> {
    let mut series = Vec::with_capacity(rows.len());
    for r in &rows {
        let pair = expand_balancing_ratios(&[BalancingDraw { regime: r.regime, ratio: r.ratio }])
            .map_err(|e| parse_err(path, format!("branch {}: {e}", r.branch)))?[0];
        match r.hour {
            Some(h) => series.push((r.branch, h, pair, r.probability)),
            None => series.extend((1..=horizon).map(|h| (r.branch, h, pair, r.probability))),
        }
    }
    let up = assemble_series(path, horizon, series.iter().map(|&(b, h, p, q)| (b, h, p.0, q)))?;
    let down = assemble_series(path, horizon, series.iter().map(|&(b, h, p, q)| (b, h, p.1, q)))?;
    Ok(up
        .into_iter()
        .zip(down)
        .map(|(u, d)| BalancingBranch { probability: u.probability, up: u.values, down: d.values })
        .collect())
}

impl Dataset {
    pub fn load(config_path: &Path) -> Result<Dataset> {
        let bytes = read(config_path)?;
        let text = String::from_utf8(bytes.clone()).map_err(|_| parse_err(config_path, "not valid UTF-8"))?;
        let config: Config = toml::from_str(&text).map_err(|e| parse_err(config_path, e.to_string()))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(parse_err(
                config_path,
                format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", config.schema_version),
            ));
        }
        let base = config_path.parent().unwrap_or(Path::new("."));
        let mut files = vec![(config_path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()), bytes)];
        let mut load = |rel: &Path| -> Result<(PathBuf, Vec<u8>)> {
            let path = base.join(rel);
            let data = read(&path)?;
            files.push((rel.to_string_lossy().into_owned(), data.clone()));
            Ok((path, data))
        };

        let horizon = config.dataset.horizon;
        let mut contracts = ContractSet::default();
        if let Some(rel) = &config.contracts.lc {
            let (p, b) = load(rel)?;
            contracts.lc = read_csv::<LcContract>(&p, &b)?;
        }
        if let Some(rel) = &config.contracts.ls {
            let (p, b) = load(rel)?;
            contracts.ls = read_csv::<LsContract>(&p, &b)?;
        }
        if let Some(rel) = &config.contracts.og {
            let (p, b) = load(rel)?;
            contracts.og = read_csv::<OgContract>(&p, &b)?;
        }
        if let Some(rel) = &config.contracts.es {
            let (p, b) = load(rel)?;
            contracts.es = read_csv::<EsContract>(&p, &b)?;
        }

        let probabilities = |path: &Path, label: &str, series: &[WeightedSeries]| -> Result<()> {
            check_probabilities(label, series.iter().map(|s| s.probability))
                .map_err(|e| VppError::InvalidData { path: path.to_path_buf(), source: Box::new(e) })
        };
        let s = &config.scenarios;
        let (p, b) = load(&s.wind)?;
        let rows: Vec<SeriesRow> = read_csv(&p, &b)?;
        let wind = assemble_series(&p, horizon, rows.into_iter().map(|r| (r.branch, r.hour, r.value, r.probability)))?;
        probabilities(&p, "wind", &wind)?;
        let (p, b) = load(&s.da_price)?;
        let rows: Vec<SeriesRow> = read_csv(&p, &b)?;
        let da_price = assemble_series(&p, horizon, rows.into_iter().map(|r| (r.branch, r.hour, r.value, r.probability)))?;
        probabilities(&p, "da_price", &da_price)?;
        let (p, b) = load(&s.id_price)?;
        let rows: Vec<IdRow> = read_csv(&p, &b)?;
        let mut by_da: BTreeMap<usize, Vec<IdRow>> = BTreeMap::new();
        for r in rows {
            by_da.entry(r.da_branch).or_default().push(r);
        }
        if by_da.keys().copied().ne(1..=da_price.len()) {
            return Err(parse_err(&p, format!("rows must cover day-ahead branches 1..={}", da_price.len())));
        }
        let id_price = by_da
            .into_values()
            .map(|rows| assemble_series(&p, horizon, rows.into_iter().map(|r| (r.branch, r.hour, r.value, r.probability))))
            .collect::<Result<Vec<_>>>()?;
        for (d, group) in id_price.iter().enumerate() {
            probabilities(&p, &format!("id_price under da branch {}", d + 1), group)?;
        }
        let (p, b) = load(&s.balancing)?;
        let rows: Vec<BalancingRow> = read_csv(&p, &b)?;
        let balancing = assemble_balancing(&p, horizon, rows)?;
        let weights: Vec<WeightedSeries> =
            balancing.iter().map(|b| WeightedSeries::new(b.probability, Vec::new())).collect();
        probabilities(&p, "balancing", &weights)?;

        let marginals = MarginalScenarios { wind, da_price, id_price, balancing };
        let scen_path = base.join(&s.wind);
        let tree = build_symmetric_tree(&marginals)
            .map_err(|e| VppError::InvalidData { path: scen_path, source: Box::new(e) })?;
        let assets = VppAssets {
            wind_capacity: config.assets.wind_capacity,
            expansion_cap: config.assets.expansion_cap,
            contracts,
        };
        assets
            .validate(horizon, config.model.ls_recovery)
            .map_err(|e| VppError::InvalidData { path: config_path.to_path_buf(), source: Box::new(e) })?;
        Ok(Dataset { config, assets, marginals, tree, files })
    }

    /// SHA-256 over every input file name and content.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (name, bytes) in &self.files {
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        }
        hex::encode(h.finalize())
    }

    /// Probability-weighted day-ahead price per hour.
    pub fn expected_da_price(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.tree.horizon];
        for s in &self.tree.scenarios {
            for (o, p) in out.iter_mut().zip(&s.da_price) {
                *o += s.probability * p;
            }
        }
        out
    }
}

/// Reads an hourly `hour,price` file.
pub fn load_prices(path: &Path) -> Result<Vec<f64>> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Row {
        hour: usize,
        price: f64,
    }
    let bytes = read(path)?;
    let rows: Vec<Row> = read_csv(path, &bytes)?;
    let mut out = Vec::with_capacity(rows.len());
    for (k, r) in rows.iter().enumerate() {
        if r.hour != k + 1 {
            return Err(parse_err(path, format!("row {}: expected hour {}, found {}", k + 1, k + 1, r.hour)));
        }
        out.push(r.price);
    }
    if out.is_empty() {
        return Err(parse_err(path, "no rows"));
    }
    Ok(out)
}

/// Contract tables of the bundled dataset. Values the tables leave open
/// (contract prices, LS size and durations, ES cycles, OG fuel factor) are
/// fixed here.
pub fn bundled_contracts() -> ContractSet {
    let lc = LcContract {
        quantity: 10.0,
        price: 32.0,
        initiation_cost: 100.0,
        min_duration: 3,
        max_duration: 6,
        max_daily_curtailments: 1,
    };
    let ls = |reduction: (usize, usize), recovery: (usize, usize)| LsContract {
        quantity: 10.0,
        price: 8.0,
        initiation_cost: 100.0,
        min_duration: 3,
        max_duration: 6,
        reduction_window: HourWindow::new(reduction.0 - 1, reduction.1 - 1),
        recovery_window: HourWindow::new(recovery.0 - 1, recovery.1 - 1),
        shift_fraction: 1.0,
    };
    let og = |price: f64| OgContract {
        p_min: 1.0,
        p_max: 10.0,
        price,
        startup_cost: 100.0,
        startup_fuel: 20.0,
        fuel_factor: 1.0,
        fuel_limit: 100.0,
        min_on: 1,
        min_off: 1,
        ramp_up: 10.0,
        ramp_down: 10.0,
    };
    let es = EsContract {
        power_rating: 10.0,
        energy_capacity: 60.0,
        efficiency: 0.9,
        price: 15.0,
        ramp_up: 20.0,
        ramp_down: 20.0,
        retention_time: 12,
        max_cycles: 1,
    };
    ContractSet {
        lc: vec![lc; 3],
        ls: vec![ls((10, 16), (4, 10)), ls((14, 20), (8, 14)), ls((16, 22), (10, 16))],
        og: vec![og(45.0), og(45.0), og(50.0)],
        es: vec![es; 3],
    }
}

/// Synthetic marginals: five wind levels, two day-ahead price paths with one
/// intraday path each, and two hourly balancing paths.
pub fn synthetic_marginals(seed: u64, horizon: usize, wind_capacity: f64) -> (MarginalScenarios, Vec<Vec<BalancingDraw>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let round2 = |x: f64| (x * 100.0).round() / 100.0;
    let hour_shape = |h: usize| {
        let t = h as f64 / horizon as f64 * std::f64::consts::TAU;
        (t, (h * 24) / horizon)
    };

    let wind_levels = [(0.15, 0.45), (0.2, 0.65), (0.3, 0.8), (0.2, 0.95), (0.15, 1.1)];
    let base_wind: Vec<f64> = (0..horizon)
        .map(|h| {
            let (t, _) = hour_shape(h);
            0.6 + 0.2 * t.cos() + rng.random_range(-0.05..0.05)
        })
        .collect();
    let wind = wind_levels
        .iter()
        .map(|&(p, level)| {
            let values = base_wind
                .iter()
                .map(|b| round2((b * level + rng.random_range(-0.06..0.06)).clamp(0.0, 1.0) * wind_capacity))
                .collect();
            WeightedSeries::new(p, values)
        })
        .collect();

    const PRICE_SHAPE: [f64; 24] = [
        24.0, 22.0, 21.0, 20.0, 21.0, 24.0, 30.0, 37.0, 42.0, 44.0, 45.0, 46.0, 45.0, 43.0, 42.0, 44.0, 48.0, 54.0,
        58.0, 55.0, 48.0, 40.0, 32.0, 27.0,
    ];
    let da_levels = [(0.5, 0.88), (0.5, 1.12)];
    let mut da_price = Vec::new();
    let mut id_price = Vec::new();
    for &(p, level) in &da_levels {
        let da: Vec<f64> = (0..horizon)
            .map(|h| round2(PRICE_SHAPE[hour_shape(h).1] * level + rng.random_range(-1.5..1.5)))
            .collect();
        let id: Vec<f64> = da.iter().map(|d| round2((d + rng.random_range(-4.0..3.0)).max(0.0))).collect();
        da_price.push(WeightedSeries::new(p, da));
        id_price.push(vec![WeightedSeries::new(1.0, id)]);
    }

    let mut balancing = Vec::new();
    let mut all_draws = Vec::new();
    for _ in 0..2 {
        let draws: Vec<BalancingDraw> = (0..horizon)
            .map(|_| BalancingDraw {
                regime: if rng.random_bool(0.5) { Regime::Deficit } else { Regime::Excess },
                ratio: round2(rng.random_range(1.1..1.4)),
            })
            .collect();
        let pairs = expand_balancing_ratios(&draws).expect("ratios drawn above one");
        balancing.push(BalancingBranch {
            probability: 0.5,
            up: pairs.iter().map(|p| p.0).collect(),
            down: pairs.iter().map(|p| p.1).collect(),
        });
        all_draws.push(draws);
    }
    (MarginalScenarios { wind, da_price, id_price, balancing }, all_draws)
}

fn csv_text<T: Serialize>(rows: &[T]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

/// Writes the bundled dataset (config plus CSVs) into `dir`.
pub fn write_synthetic_dataset(dir: &Path, seed: u64) -> Result<PathBuf> {
    let horizon = 24;
    let wind_capacity = 50.0;
    let (marginals, draws) = synthetic_marginals(seed, horizon, wind_capacity);
    let contracts = bundled_contracts();
    let mk = |p: &Path| fs::create_dir_all(p).map_err(|source| VppError::Io { path: p.to_path_buf(), source });
    mk(dir)?;
    let write = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|source| VppError::Io { path, source })
    };

    let config = Config {
        schema_version: SCHEMA_VERSION,
        dataset: DatasetSection { name: format!("synthetic-{seed}"), horizon },
        assets: AssetsSection { wind_capacity, expansion_cap: 30.0 },
        contracts: ContractFiles {
            lc: Some("contracts_lc.csv".into()),
            ls: Some("contracts_ls.csv".into()),
            og: Some("contracts_og.csv".into()),
            es: Some("contracts_es.csv".into()),
        },
        scenarios: ScenarioFiles {
            wind: "wind.csv".into(),
            da_price: "da_price.csv".into(),
            id_price: "id_price.csv".into(),
            balancing: "balancing.csv".into(),
        },
        model: VppOptions::default(),
        solver: SolverSection::default(),
        sweep: SweepSection::default(),
    };
    let text = toml::to_string(&config).map_err(|e| VppError::ModelAssembly(e.to_string()))?;
    write("vpp.toml", text.into_bytes())?;
    write("contracts_lc.csv", csv_text(&contracts.lc))?;
    write("contracts_ls.csv", csv_text(&contracts.ls))?;
    write("contracts_og.csv", csv_text(&contracts.og))?;
    write("contracts_es.csv", csv_text(&contracts.es))?;

    #[derive(Serialize)]
    struct Series {
        branch: usize,
        hour: usize,
        value: f64,
        probability: f64,
    }
    let series = |ws: &[WeightedSeries]| -> Vec<Series> {
        ws.iter()
            .enumerate()
            .flat_map(|(b, s)| {
                s.values.iter().enumerate().map(move |(h, &value)| Series {
                    branch: b + 1,
                    hour: h + 1,
                    value,
                    probability: s.probability,
                })
            })
            .collect()
    };
    write("wind.csv", csv_text(&series(&marginals.wind)))?;
    write("da_price.csv", csv_text(&series(&marginals.da_price)))?;

    #[derive(Serialize)]
    struct Id {
        da_branch: usize,
        branch: usize,
        hour: usize,
        value: f64,
        probability: f64,
    }
    let mut ids = Vec::new();
    for (d, group) in marginals.id_price.iter().enumerate() {
        for s in series(group) {
            ids.push(Id { da_branch: d + 1, branch: s.branch, hour: s.hour, value: s.value, probability: s.probability });
        }
    }
    write("id_price.csv", csv_text(&ids))?;

    #[derive(Serialize)]
    struct Bal {
        branch: usize,
        hour: usize,
        regime: Regime,
        ratio: f64,
        probability: f64,
    }
    let mut bal = Vec::new();
    for (b, (branch, path)) in marginals.balancing.iter().zip(&draws).enumerate() {
        for (h, d) in path.iter().enumerate() {
            bal.push(Bal { branch: b + 1, hour: h + 1, regime: d.regime, ratio: d.ratio, probability: branch.probability });
        }
    }
    write("balancing.csv", csv_text(&bal))?;
    Ok(dir.join("vpp.toml"))
}
