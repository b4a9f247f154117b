use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use milp_core::{parse_lp_file, solve_milp, SolveOptions, Status};

fn vpp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vpp")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn bundled() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/bundled")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn copy_bundled(to: &Path) -> PathBuf {
    for e in fs::read_dir(bundled()).unwrap() {
        let e = e.unwrap();
        fs::copy(e.path(), to.join(e.file_name())).unwrap();
    }
    to.join("vpp.toml")
}

const ONE_PRICE: &[(f64, [f64; 4])] = &[(1.0, [30.0, 48.0, 52.0, 40.0])];
const ONE_PATH: &str = "1,1,deficit,1.3,1\n1,2,excess,1.2,1\n1,3,deficit,1.25,1\n1,4,excess,1.1,1\n";
const TWO_PATHS: &str = "1,1,deficit,1.3,0.5\n1,2,excess,1.2,0.5\n1,3,deficit,1.25,0.5\n1,4,excess,1.1,0.5\n\
                         2,1,excess,1.2,0.5\n2,2,deficit,1.4,0.5\n2,3,excess,1.15,0.5\n2,4,deficit,1.3,0.5\n";

/// A four-hour dataset with one intraday branch per day-ahead branch.
fn small_dataset(
    dir: &Path,
    wind: &[(f64, [f64; 4])],
    da_price: &[(f64, [f64; 4])],
    balancing: &str,
    generator: bool,
) -> PathBuf {
    let contracts = if generator { "og = \"og.csv\"\n" } else { "" };
    let config = format!(
        "schema_version = 1\n\n[dataset]\nname = \"small\"\nhorizon = 4\n\n[assets]\nwind_capacity = 20.0\nexpansion_cap = 5.0\n\n\
         [contracts]\n{contracts}\n[scenarios]\nwind = \"wind.csv\"\nda_price = \"da.csv\"\nid_price = \"id.csv\"\nbalancing = \"bal.csv\"\n\n\
         [model]\nls_recovery = \"uniform\"\nid_nonanticipativity = \"branch\"\n\n[solver]\ngap = 1e-9\nnode_limit = 100000\n\n\
         [sweep]\nsteps = 8\nbisection_tol = 0.001\n"
    );
    fs::write(dir.join("vpp.toml"), config).unwrap();
    fs::write(
        dir.join("og.csv"),
        "p_min,p_max,price,startup_cost,startup_fuel,fuel_factor,fuel_limit,min_on,min_off,ramp_up,ramp_down\n\
         1,6,35,20,2,1,40,1,1,6,6\n",
    )
    .unwrap();
    let series = |branches: &[(f64, [f64; 4])]| -> String {
        let mut out = String::from("branch,hour,value,probability\n");
        for (b, (p, values)) in branches.iter().enumerate() {
            for (h, v) in values.iter().enumerate() {
                out.push_str(&format!("{},{},{v},{p}\n", b + 1, h + 1));
            }
        }
        out
    };
    fs::write(dir.join("wind.csv"), series(wind)).unwrap();
    let da = series(da_price);
    let mut id = String::from("da_branch,branch,hour,value,probability\n");
    for (b, (_, values)) in da_price.iter().enumerate() {
        for (h, v) in values.iter().enumerate() {
            id.push_str(&format!("{},1,{},{},1\n", b + 1, h + 1, v - 6.0));
        }
    }
    fs::write(dir.join("da.csv"), da).unwrap();
    fs::write(dir.join("id.csv"), id).unwrap();
    fs::write(dir.join("bal.csv"), format!("branch,hour,regime,ratio,probability\n{balancing}")).unwrap();
    dir.join("vpp.toml")
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn num(x: &str) -> f64 {
    x.parse().unwrap_or_else(|_| panic!("not a number: {x}"))
}

#[test]
fn validate_accepts_the_bundled_data() {
    let out = vpp(&["validate", "--config", s(&bundled().join("vpp.toml"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("ok (20 scenarios, 24 hours"), "{}", stdout(&out));
}

#[test]
fn scaled_probabilities_fail_validation_naming_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = copy_bundled(dir.path());
    let path = dir.path().join("da_price.csv");
    let text = fs::read_to_string(&path).unwrap().replace(",0.5\n", ",1\n");
    fs::write(&path, text).unwrap();
    let out = vpp(&["validate", "--config", s(&config)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("da_price.csv"), "{}", stderr(&out));
}

#[test]
fn unknown_contract_column_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = copy_bundled(dir.path());
    let path = dir.path().join("contracts_lc.csv");
    let text: String = fs::read_to_string(&path)
        .unwrap()
        .lines()
        .enumerate()
        .map(|(k, l)| if k == 0 { format!("{l},notice_hours\n") } else { format!("{l},2\n") })
        .collect();
    fs::write(&path, text).unwrap();
    let out = vpp(&["validate", "--config", s(&config)]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("notice_hours") && err.contains("contracts_lc.csv"), "{err}");
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = vpp(&["validate", "--config", s(&dir.path().join("nope.toml"))]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("nope.toml"));
}

#[test]
fn bad_arguments_exit_with_validation_code() {
    assert_eq!(code(&vpp(&["frobnicate"])), 1);
    let out = vpp(&["export-lp", "--config", s(&bundled().join("vpp.toml")), "--model", "lp@3", "--output", "x.lp"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("unknown model"), "{}", stderr(&out));
    assert_eq!(code(&vpp(&["solve", "--p", "-0.1"])), 1);
}

#[test]
fn dag_without_contracts_is_idle() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_dataset(dir.path(), &[(1.0, [5.0, 6.0, 7.0, 8.0])], ONE_PRICE, ONE_PATH, false);
    let out_dir = dir.path().join("out");
    let out = vpp(&["dag", "--config", s(&config), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("dag objective 0.000000"));
    let rows = read_csv(&out_dir.join("dag_schedule.csv"));
    let col = rows[0].iter().position(|c| c == "delivered").unwrap();
    assert!(rows[1..].iter().all(|r| num(&r[col]) == 0.0));

    let lp = dir.path().join("dag.lp");
    let out = vpp(&["export-lp", "--config", s(&config), "--model", "dag", "--output", s(&lp)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let model = parse_lp_file(&fs::read_to_string(&lp).unwrap()).unwrap();
    let sol = solve_milp(&model, &SolveOptions::default());
    assert_eq!(sol.status, Status::Optimal);
    assert_eq!(sol.objective, 0.0);
}

#[test]
fn dag_schedule_recosts_to_its_objective() {
    let dir = tempfile::tempdir().unwrap();
    let prices: String = (1..=24).map(|h| format!("{h},{}\n", if (10..=16).contains(&h) { 55.0 } else { 20.0 })).collect();
    let prices_path = dir.path().join("prices.csv");
    fs::write(&prices_path, format!("hour,price\n{prices}")).unwrap();
    let out_dir = dir.path().join("out");
    let out = vpp(&["dag", "--config", s(&bundled().join("vpp.toml")), "--prices", s(&prices_path), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let rows = read_csv(&out_dir.join("dag_schedule.csv"));
    let at = |name: &str| rows[0].iter().position(|c| c == name).unwrap();
    let (p, q, c) = (at("price"), at("delivered"), at("cost"));
    let recosted: f64 = rows[1..].iter().map(|r| num(&r[p]) * num(&r[q]) - num(&r[c])).sum();
    let summary = read_csv(&out_dir.join("dag_summary.csv"));
    let objective = num(&summary[1][0]);
    assert!(objective > 0.0);
    assert!((recosted - objective).abs() <= 1e-6 * objective.abs() + 24.0 * 1e-6 * 55.0, "{recosted} vs {objective}");
}

fn without_row_names(lp: &str) -> Vec<String> {
    lp.lines()
        .map(|l| match l.trim_start().split_once(": ") {
            Some((name, rest)) if !name.contains(' ') => rest.to_string(),
            _ => l.trim().to_string(),
        })
        .collect()
}

#[test]
fn unbounded_regret_export_is_the_stochastic_model() {
    let dir = tempfile::tempdir().unwrap();
    let config = bundled().join("vpp.toml");
    let (a, b) = (dir.path().join("vpp.lp"), dir.path().join("inf.lp"));
    assert_eq!(code(&vpp(&["export-lp", "--config", s(&config), "--model", "vpp", "--output", s(&a)])), 0);
    assert_eq!(code(&vpp(&["export-lp", "--config", s(&config), "--model", "probust@inf", "--output", s(&b)])), 0);
    let (a, b) = (fs::read_to_string(a).unwrap(), fs::read_to_string(b).unwrap());
    assert!(a.contains("Subject To"));
    assert_eq!(without_row_names(&a), without_row_names(&b));
}

#[test]
fn single_scenario_sweep_has_no_regret() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_dataset(dir.path(), &[(1.0, [9.0, 12.0, 4.0, 15.0])], ONE_PRICE, ONE_PATH, true);
    let out_dir = dir.path().join("out");
    let out = vpp(&["sweep", "--config", s(&config), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = read_csv(&out_dir.join("profits_by_scenario.csv"));
    assert!(rows.len() >= 3);
    assert!(rows[1..].iter().all(|r| r[1..] == rows[1][1..]), "{rows:?}");
    let mrr = read_csv(&out_dir.join("mrr_vs_profit.csv"));
    assert!(mrr[1..].iter().all(|r| r[1] == "0.000000"), "{mrr:?}");
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-4 * b.abs().max(1.0)
}

#[test]
fn sweep_tables_are_recomputable() {
    let dir = tempfile::tempdir().unwrap();
    let wind = [(0.3, [2.0, 14.0, 3.0, 16.0]), (0.45, [9.0, 6.0, 12.0, 5.0]), (0.25, [17.0, 19.0, 8.0, 1.0])];
    let prices = [(0.6, [30.0, 48.0, 52.0, 40.0]), (0.4, [44.0, 21.0, 60.0, 18.0])];
    let config = small_dataset(dir.path(), &wind, &prices, TWO_PATHS, true);
    let out_dir = dir.path().join("out");
    let out = vpp(&["sweep", "--config", s(&config), "--out", s(&out_dir), "--steps", "6"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let optima = read_csv(&out_dir.join("scenario_optima.csv"));
    let probs: Vec<f64> = optima[1..].iter().map(|r| num(&r[1])).collect();
    let z: Vec<f64> = optima[1..].iter().map(|r| num(&r[2])).collect();
    let profits = read_csv(&out_dir.join("profits_by_scenario.csv"));
    let table = read_csv(&out_dir.join("mrr_vs_profit.csv"));
    assert_eq!(profits.len(), table.len());
    assert_eq!(table[0], ["p", "mrr_pct", "mrr_reduction_pct", "expected_income", "income_reduction_pct"]);

    let mut base: Option<(f64, f64)> = None;
    let mut prev: Option<(f64, f64)> = None;
    let mut infeasible = 0;
    for (prow, trow) in profits[1..].iter().zip(&table[1..]) {
        assert_eq!(prow[0], trow[0]);
        if prow[1] == "infeasible" {
            assert!(trow[1..].iter().all(|c| c == "infeasible"));
            infeasible += 1;
            continue;
        }
        let x: Vec<f64> = prow[1..].iter().map(|c| num(c)).collect();
        let mrr = 100.0 * z.iter().zip(&x).map(|(z, x)| (z - x) / z).fold(f64::NEG_INFINITY, f64::max);
        let income: f64 = probs.iter().zip(&x).map(|(q, x)| q * x).sum();
        let (mrr0, income0) = *base.get_or_insert((mrr, income));
        assert!(close(num(&trow[1]), mrr), "{} vs {mrr}", trow[1]);
        assert!(close(num(&trow[3]), income), "{} vs {income}", trow[3]);
        assert!(close(num(&trow[2]), if mrr0 == 0.0 { 0.0 } else { 100.0 * (mrr0 - mrr) / mrr0 }));
        assert!(close(num(&trow[4]), 100.0 * (income0 - income) / income0));
        if let Some((m, r)) = prev {
            assert!(num(&trow[1]) <= m + 1e-6, "MRR rises");
            assert!(num(&trow[4]) >= r - 1e-6, "income reduction falls");
        }
        prev = Some((num(&trow[1]), num(&trow[4])));
        if trow[0] != "+inf" {
            assert!(mrr / 100.0 <= num(&trow[0]) + 1e-6);
        }
    }
    assert!(base.unwrap().0 > 0.0, "no regret to trade off");
    assert_eq!(infeasible, 1, "{table:?}");
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let wind = [(0.5, [3.0, 11.0, 6.0, 14.0]), (0.5, [12.0, 4.0, 10.0, 2.0])];
    let config = small_dataset(dir.path(), &wind, ONE_PRICE, TWO_PATHS, true);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (threads, out) in [("1", &a), ("3", &b)] {
        let run = vpp(&["sweep", "--config", s(&config), "--out", s(out), "--threads", threads, "--steps", "5"]);
        assert_eq!(code(&run), 0, "{}", stderr(&run));
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 5);
    for name in names.iter().filter(|n| *n != "timings.json") {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name:?}");
    }

    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    for entry in manifest["outputs"].as_array().unwrap() {
        let bytes = fs::read(a.join(entry["file"].as_str().unwrap())).unwrap();
        assert_eq!(entry["bytes"].as_u64().unwrap() as usize, bytes.len());
    }
}

#[test]
fn offer_curves_verb_writes_monotone_curves() {
    let dir = tempfile::tempdir().unwrap();
    let wind = [(0.5, [3.0, 11.0, 6.0, 14.0]), (0.5, [12.0, 4.0, 10.0, 2.0])];
    let config = small_dataset(dir.path(), &wind, ONE_PRICE, TWO_PATHS, true);
    let out_dir = dir.path().join("out");
    let out = vpp(&["offer-curves", "--config", s(&config), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = read_csv(&out_dir.join("offer_curves.csv"));
    assert_eq!(rows[0], ["hour", "price", "quantity"]);
    for w in rows[1..].windows(2) {
        if w[0][0] == w[1][0] {
            assert!(num(&w[1][1]) > num(&w[0][1]) && num(&w[1][2]) >= num(&w[0][2]));
        }
    }
}

#[test]
fn generate_writes_a_loadable_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = vpp(&["generate", "--out", s(dir.path()), "--seed", "7"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = vpp(&["validate", "--config", s(&dir.path().join("vpp.toml"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("synthetic-7"));
}
