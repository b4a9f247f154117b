#![allow(dead_code)]

use milp_core::{solve_lp, MilpModel, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vpp_core::contracts::*;
use vpp_core::scenario::*;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn r2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

pub fn lc(rng: &mut ChaCha8Rng, horizon: usize) -> LcContract {
    let min = rng.random_range(1..=horizon.min(3));
    LcContract {
        quantity: r2(rng.random_range(1.0..10.0)),
        price: r2(rng.random_range(5.0..40.0)),
        initiation_cost: r2(rng.random_range(0.0..100.0)),
        min_duration: min,
        max_duration: rng.random_range(min..=horizon),
        max_daily_curtailments: rng.random_range(1..=2),
    }
}

fn window(rng: &mut ChaCha8Rng, horizon: usize, min_len: usize) -> HourWindow {
    let len = rng.random_range(min_len..=horizon);
    let first = rng.random_range(0..=horizon - len);
    HourWindow::new(first, first + len - 1)
}

pub fn ls(rng: &mut ChaCha8Rng, horizon: usize) -> LsContract {
    let min = rng.random_range(1..=horizon.min(2));
    LsContract {
        quantity: r2(rng.random_range(1.0..10.0)),
        price: r2(rng.random_range(5.0..30.0)),
        initiation_cost: r2(rng.random_range(0.0..50.0)),
        min_duration: min,
        max_duration: rng.random_range(min..=horizon),
        reduction_window: window(rng, horizon, min),
        recovery_window: window(rng, horizon, 1),
        shift_fraction: r2(rng.random_range(0.2..1.0)),
    }
}

pub fn og(rng: &mut ChaCha8Rng, horizon: usize) -> OgContract {
    let p_min = r2(rng.random_range(1.0..3.0));
    let min_on = rng.random_range(1..=horizon.min(3));
    let fuel_factor = r2(rng.random_range(0.5..1.5));
    OgContract {
        p_min,
        p_max: r2(rng.random_range(p_min..10.0)),
        price: r2(rng.random_range(20.0..50.0)),
        startup_cost: r2(rng.random_range(0.0..100.0)),
        startup_fuel: r2(rng.random_range(0.0..20.0)),
        fuel_factor,
        fuel_limit: ((p_min * min_on as f64 * fuel_factor + rng.random_range(0.0..100.0)) * 100.0).ceil() / 100.0,
        min_on,
        min_off: rng.random_range(1..=horizon.min(3)),
        ramp_up: r2(rng.random_range(3.0..10.0)),
        ramp_down: r2(rng.random_range(3.0..10.0)),
    }
}

pub fn es(rng: &mut ChaCha8Rng, horizon: usize) -> EsContract {
    EsContract {
        power_rating: r2(rng.random_range(2.0..10.0)),
        energy_capacity: r2(rng.random_range(5.0..60.0)),
        efficiency: r2(rng.random_range(0.7..1.0)),
        price: r2(rng.random_range(5.0..30.0)),
        ramp_up: r2(rng.random_range(2.0..10.0)),
        ramp_down: r2(rng.random_range(2.0..10.0)),
        retention_time: rng.random_range(1..=horizon),
        max_cycles: rng.random_range(1..=2),
    }
}

pub fn prices(rng: &mut ChaCha8Rng, horizon: usize) -> Vec<f64> {
    (0..horizon).map(|_| r2(rng.random_range(10.0..80.0))).collect()
}

/// A self-scheduling instance whose model has at most twelve binaries.
pub fn tiny_dag(rng: &mut ChaCha8Rng) -> (ContractSet, Vec<f64>) {
    let horizon = [2, 3, 4][rng.random_range(0..3)];
    let mut budget = 12 / horizon;
    let mut set = ContractSet::default();
    loop {
        let kind = rng.random_range(0..4);
        let cost = if kind == 2 { 1 } else { 3 };
        if cost > budget {
            if budget == 0 || !set.is_empty() {
                break;
            }
            continue;
        }
        budget -= cost;
        match kind {
            0 => set.lc.push(lc(rng, horizon)),
            1 => set.ls.push(ls(rng, horizon)),
            2 => set.og.push(og(rng, horizon)),
            _ => set.es.push(es(rng, horizon)),
        }
        if rng.random_bool(0.3) {
            break;
        }
    }
    let p = prices(rng, horizon);
    (set, p)
}

/// Up to `per_type` random contracts of each strategy.
pub fn contracts(rng: &mut ChaCha8Rng, horizon: usize, per_type: usize) -> ContractSet {
    let mut n = || rng.random_range(0..=per_type);
    let (a, b, c, d) = (n(), n(), n(), n());
    ContractSet {
        lc: (0..a).map(|_| lc(rng, horizon)).collect(),
        ls: (0..b).map(|_| ls(rng, horizon)).collect(),
        og: (0..c).map(|_| og(rng, horizon)).collect(),
        es: (0..d).map(|_| es(rng, horizon)).collect(),
    }
}

fn weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..4.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let head: f64 = w[..n - 1].iter().sum();
    w[n - 1] = 1.0 - head;
    w
}

/// Random marginals with the given branch counts.
pub fn marginals(rng: &mut ChaCha8Rng, horizon: usize, counts: [usize; 4], wind_cap: f64) -> MarginalScenarios {
    let [n1, n2, n3, n4] = counts;
    let series = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| -> Vec<f64> { (0..horizon).map(|_| r2(rng.random_range(lo..hi))).collect() };
    let w1 = weights(rng, n1);
    let wind = w1.iter().map(|&p| WeightedSeries::new(p, series(rng, 0.0, wind_cap))).collect();
    let w2 = weights(rng, n2);
    let da: Vec<WeightedSeries> = w2.iter().map(|&p| WeightedSeries::new(p, series(rng, 10.0, 80.0))).collect();
    let id = da
        .iter()
        .map(|d| {
            let w3 = weights(rng, n3);
            w3.iter()
                .map(|&p| {
                    let v = d.values.iter().map(|x| r2((x + rng.random_range(-8.0..6.0)).max(0.0))).collect();
                    WeightedSeries::new(p, v)
                })
                .collect()
        })
        .collect();
    let w4 = weights(rng, n4);
    let balancing = w4
        .iter()
        .map(|&p| {
            let draws: Vec<BalancingDraw> = (0..horizon)
                .map(|_| BalancingDraw {
                    regime: if rng.random_bool(0.5) { Regime::Deficit } else { Regime::Excess },
                    ratio: r2(rng.random_range(1.0..1.5)),
                })
                .collect();
            let pairs = expand_balancing_ratios(&draws).unwrap();
            BalancingBranch {
                probability: p,
                up: pairs.iter().map(|x| x.0).collect(),
                down: pairs.iter().map(|x| x.1).collect(),
            }
        })
        .collect();
    MarginalScenarios { wind, da_price: da, id_price: id, balancing }
}

pub fn tree(rng: &mut ChaCha8Rng, horizon: usize, counts: [usize; 4], wind_cap: f64) -> ScenarioTree {
    build_symmetric_tree(&marginals(rng, horizon, counts, wind_cap)).unwrap()
}

/// Best objective over every assignment of the free binaries, each completed
/// by an LP; `None` if no assignment is feasible.
pub fn enumerate_binaries(model: &MilpModel) -> Option<f64> {
    let free: Vec<_> = model
        .var_ids()
        .filter(|&v| {
            let var = model.variable(v);
            var.is_binary() && var.lower < var.upper
        })
        .collect();
    assert!(free.len() <= 16, "{} free binaries is too many to enumerate", free.len());
    let maximize = model.direction() == milp_core::Direction::Maximize;
    let mut best: Option<f64> = None;
    for mask in 0u32..(1u32 << free.len()) {
        let mut fixed = model.clone();
        for (k, &v) in free.iter().enumerate() {
            let val = ((mask >> k) & 1) as f64;
            fixed.set_bounds(v, val, val).unwrap();
        }
        let sol = solve_lp(&fixed);
        if sol.status == Status::Optimal {
            best = Some(match best {
                None => sol.objective,
                Some(b) if maximize => b.max(sol.objective),
                Some(b) => b.min(sol.objective),
            });
        }
    }
    best
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
