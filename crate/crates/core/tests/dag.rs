use milp_core::SolveOptions;
use vpp_core::contracts::*;

fn og_table3() -> OgContract {
    OgContract {
        p_min: 1.0,
        p_max: 10.0,
        price: 45.0,
        startup_cost: 100.0,
        startup_fuel: 20.0,
        fuel_factor: 1.0,
        fuel_limit: 100.0,
        min_on: 1,
        min_off: 1,
        ramp_up: 10.0,
        ramp_down: 10.0,
    }
}

fn solve(set: &ContractSet, prices: &[f64]) -> DagResult {
    let (m, h) = build_dag_model(set, prices, LsRecovery::Uniform).unwrap();
    solve_dag_schedule(&m, &h, set, &SolveOptions::default()).unwrap()
}

#[test]
fn no_contracts_objective_zero() {
    let r = solve(&ContractSet::default(), &[30.0; 24]);
    assert_eq!(r.objective, 0.0);
}

#[test]
fn og_single_expensive_hour() {
    let mut prices = vec![30.0; 24];
    prices[7] = 60.0;
    let set = ContractSet { og: vec![og_table3()], ..Default::default() };
    let r = solve(&set, &prices);
    assert!((r.objective - 50.0).abs() < 1e-6, "{}", r.objective);
    let c = &r.schedule.og.contracts[0];
    assert!(c.status[7] && c.status.iter().filter(|&&b| b).count() == 1);
    assert!((c.output[7] - 10.0).abs() < 1e-6);
}

#[test]
fn og_fuel_budget_caps_energy() {
    let set = ContractSet { og: vec![og_table3()], ..Default::default() };
    let r = solve(&set, &[80.0; 24]);
    let e: f64 = r.schedule.og.contracts[0].output.iter().sum();
    assert!(e <= 80.0 + 1e-7 && e > 79.0, "{e}");
}

#[test]
fn es_energy_budget() {
    let es = EsContract {
        power_rating: 10.0,
        energy_capacity: 60.0,
        efficiency: 0.9,
        price: 15.0,
        ramp_up: 10.0,
        ramp_down: 10.0,
        retention_time: 24,
        max_cycles: 2,
    };
    let set = ContractSet { es: vec![es], ..Default::default() };
    let r = solve(&set, &[40.0; 24]);
    let e: f64 = r.schedule.es.contracts[0].output.iter().sum();
    assert!((e - 54.0).abs() < 1e-6, "{e}");
    assert!((r.objective - 25.0 * 54.0).abs() < 1e-6);
}

#[test]
fn lc_one_curtailment() {
    let lc = LcContract {
        quantity: 5.0,
        price: 30.0,
        initiation_cost: 10.0,
        min_duration: 3,
        max_duration: 6,
        max_daily_curtailments: 1,
    };
    let mut prices = vec![20.0; 24];
    for p in &mut prices[10..20] {
        *p = 55.0;
    }
    let set = ContractSet { lc: vec![lc], ..Default::default() };
    let r = solve(&set, &prices);
    let on = r.schedule.lc.contracts[0].status.iter().filter(|&&b| b).count();
    assert_eq!(on, 6);
    assert!((r.objective - (6.0 * 25.0 * 5.0 - 10.0)).abs() < 1e-6);
}

#[test]
fn lc_idle_when_price_is_low() {
    let set = ContractSet { lc: bundled().lc, ..Default::default() };
    let r = solve(&set, &[31.0; 24]);
    assert_eq!(r.objective, 0.0);
    assert!(r.schedule.lc.contracts.iter().all(|c| c.status.iter().all(|&b| !b)));
    assert!(r.schedule.lc.power.iter().chain(&r.schedule.lc.cost).all(|&v| v.abs() < 1e-9));
}

#[test]
fn lc_flat_high_price_single_long_run() {
    let set = ContractSet { lc: vec![bundled().lc[0].clone()], ..Default::default() };
    let r = solve(&set, &[80.0; 24]);
    let status = &r.schedule.lc.contracts[0].status;
    let starts = r.schedule.lc.contracts[0].start.iter().filter(|&&b| b).count();
    let on = status.iter().filter(|&&b| b).count();
    assert_eq!(starts, 1);
    assert!((3..=6).contains(&on));
    // a single run of at most six hours beats anything else under a flat price
    assert!((r.objective - (6.0 * (80.0 - 32.0) * 10.0 - 100.0)).abs() < 1e-6);
}

#[test]
fn ls_stays_inside_reduction_window() {
    let mut ls = bundled().ls[0].clone();
    ls.recovery_window = HourWindow::empty();
    let set = ContractSet { ls: vec![ls], ..Default::default() };
    let (m, h) = build_dag_model(&set, &[90.0; 24], LsRecovery::None).unwrap();
    let r = solve_dag_schedule(&m, &h, &set, &SolveOptions::default()).unwrap();
    let status = &r.schedule.ls.contracts[0].status;
    assert!(status.iter().any(|&b| b));
    for (hour, &on) in status.iter().enumerate() {
        assert!(!on || (9..=15).contains(&hour), "active at hour {}", hour + 1);
    }
}

#[test]
fn ls_zero_fraction_contributes_nothing() {
    let mut ls = bundled().ls[0].clone();
    ls.shift_fraction = 0.0;
    ls.price = 0.0;
    ls.initiation_cost = 0.0;
    let set = ContractSet { ls: vec![ls], ..Default::default() };
    let r = solve(&set, &[90.0; 24]);
    assert!(r.objective.abs() < 1e-9);
    assert!(r.schedule.ls.power.iter().chain(&r.schedule.ls.cost).all(|&v| v.abs() < 1e-9));
}

#[test]
fn og_first_hour_ramp_from_cold() {
    let mut og = og_table3();
    og.ramp_up = 4.0;
    og.startup_cost = 0.0;
    let set = ContractSet { og: vec![og], ..Default::default() };
    let r = solve(&set, &[100.0; 3]);
    let out = &r.schedule.og.contracts[0].output;
    assert!((out[0] - 4.0).abs() < 1e-7 && (out[1] - 8.0).abs() < 1e-7, "{out:?}");
}

#[test]
fn es_single_cycle() {
    let set = ContractSet { es: vec![bundled().es[0].clone()], ..Default::default() };
    let mut prices = vec![40.0; 24];
    for p in &mut prices[6..12] {
        *p = 10.0;
    }
    let r = solve(&set, &prices);
    let c = &r.schedule.es.contracts[0];
    assert_eq!(c.start.iter().filter(|&&b| b).count(), 1);
    assert!(c.output.iter().sum::<f64>() <= 54.0 + 1e-7);
}

#[test]
fn two_level_prices_dispatch_only_when_high() {
    let mut set = bundled();
    set.ls.clear();
    let prices: Vec<f64> = (0..24).map(|h| if (10..16).contains(&h) { 55.0 } else { 20.0 }).collect();
    let r = solve(&set, &prices);
    assert!(r.objective > 0.0);
    for st in [Strategy::Lc, Strategy::Og, Strategy::Es] {
        for (h, &p) in r.schedule.strategy(st).power.iter().enumerate() {
            if prices[h] < 55.0 {
                assert!(p.abs() < 1e-7, "{st} delivers {p} MW at low-price hour {}", h + 1);
            }
        }
    }
    let delivered = r.schedule.delivered_power(&set, LsRecovery::Uniform);
    let cost = r.schedule.operating_cost(&set);
    let recomputed: f64 = (0..24).map(|h| prices[h] * delivered[h] - cost[h]).sum();
    assert!((recomputed - r.objective).abs() < 1e-6);
}

fn bundled() -> ContractSet {
    vpp_core::dataset::bundled_contracts()
}
