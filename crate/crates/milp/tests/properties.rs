use milp_core::{
    export_lp_file, parse_lp_file, solve_lp, solve_milp, solve_milp_from, Direction, LinearExpr, MilpModel, Sense, SolveOptions,
    Status, Variable,
};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Spec {
    maximize: bool,
    bins: usize,
    conts: usize,
    obj: Vec<i32>,
    rows: Vec<(Vec<i32>, u8, i32)>,
    cont_upper: Vec<u8>,
}

fn spec(max_bins: usize) -> impl Strategy<Value = Spec> {
    sized_spec(max_bins, 4, 7)
}

fn sized_spec(max_bins: usize, max_conts: usize, max_rows: usize) -> impl Strategy<Value = Spec> {
    (1..=max_bins, 0..=max_conts, 1..=max_rows, any::<bool>()).prop_flat_map(|(bins, conts, m, maximize)| {
        let n = bins + conts;
        (
            prop::collection::vec(-6i32..=6, n),
            prop::collection::vec((prop::collection::vec(-5i32..=5, n), 0u8..3, -4i32..=12), m),
            prop::collection::vec(1u8..=10, conts),
        )
            .prop_map(move |(obj, rows, cont_upper)| Spec { maximize, bins, conts, obj, rows, cont_upper })
    })
}

fn build(s: &Spec) -> MilpModel {
    let dir = if s.maximize { Direction::Maximize } else { Direction::Minimize };
    let mut m = MilpModel::new(dir);
    let mut vars = Vec::new();
    for i in 0..s.bins {
        vars.push(m.add_variable(Variable::binary(format!("b{i}"))).unwrap());
    }
    for i in 0..s.conts {
        vars.push(m.add_variable(Variable::continuous(format!("x{i}"), 0.0, s.cont_upper[i] as f64)).unwrap());
    }
    for (k, (coefs, sense, rhs)) in s.rows.iter().enumerate() {
        let expr = coefs.iter().zip(&vars).fold(LinearExpr::new(), |e, (&c, &v)| e.term(v, c as f64));
        let sense = [Sense::Le, Sense::Ge, Sense::Eq][*sense as usize];
        m.add_constraint(format!("r{k}"), expr, sense, *rhs as f64).unwrap();
    }
    let obj = s.obj.iter().zip(&vars).fold(LinearExpr::new(), |e, (&c, &v)| e.term(v, c as f64));
    m.set_objective(obj).unwrap();
    m
}

/// Best objective over all binary assignments, each solved as an LP.
fn enumerate(model: &MilpModel) -> Option<f64> {
    let bins: Vec<_> = model.var_ids().filter(|&v| model.variable(v).is_binary()).collect();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << bins.len()) {
        let mut fixed = model.clone();
        for (k, &v) in bins.iter().enumerate() {
            let val = ((mask >> k) & 1) as f64;
            fixed.set_bounds(v, val, val).unwrap();
        }
        let s = solve_lp(&fixed);
        if s.status == Status::Optimal {
            let better = match best {
                None => true,
                Some(b) => match model.direction() {
                    Direction::Maximize => s.objective > b,
                    Direction::Minimize => s.objective < b,
                },
            };
            if better {
                best = Some(s.objective);
            }
        }
    }
    best
}

/// Vertex enumeration for tiny bounded LPs: every choice of `n` tight
/// constraints (rows or bounds) is solved densely and kept if feasible.
fn vertex_oracle(model: &MilpModel) -> Option<f64> {
    let n = model.num_variables();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in model.constraints() {
        let mut a = vec![0.0; n];
        for &(v, k) in &c.expr.terms {
            a[v.index()] = k;
        }
        planes.push((a, c.rhs));
    }
    for (j, v) in model.variables().iter().enumerate() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), v.lower));
        planes.push((e, v.upper));
    }
    let mut best: Option<f64> = None;
    let mut pick = vec![0usize; n];
    fn rec(
        start: usize,
        depth: usize,
        pick: &mut Vec<usize>,
        planes: &[(Vec<f64>, f64)],
        model: &MilpModel,
        best: &mut Option<f64>,
    ) {
        let n = pick.len();
        if depth == n {
            let mut a: Vec<Vec<f64>> = pick.iter().map(|&p| planes[p].0.clone()).collect();
            let mut b: Vec<f64> = pick.iter().map(|&p| planes[p].1).collect();
            for col in 0..n {
                let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
                if a[piv][col].abs() < 1e-9 {
                    return;
                }
                a.swap(col, piv);
                b.swap(col, piv);
                for r in 0..n {
                    if r != col {
                        let f = a[r][col] / a[col][col];
                        for k in col..n {
                            a[r][k] -= f * a[col][k];
                        }
                        b[r] -= f * b[col];
                    }
                }
            }
            let x: Vec<f64> = (0..n).map(|i| b[i] / a[i][i]).collect();
            if model.max_violation(&x) > 1e-7 {
                return;
            }
            for (j, v) in model.variables().iter().enumerate() {
                if x[j] < v.lower - 1e-7 || x[j] > v.upper + 1e-7 {
                    return;
                }
            }
            let z = model.objective().evaluate(&x);
            let better = match *best {
                None => true,
                Some(bz) => match model.direction() {
                    Direction::Maximize => z > bz,
                    Direction::Minimize => z < bz,
                },
            };
            if better {
                *best = Some(z);
            }
            return;
        }
        for p in start..planes.len() {
            pick[depth] = p;
            rec(p + 1, depth + 1, pick, planes, model, best);
        }
    }
    rec(0, 0, &mut pick, &planes, model, &mut best);
    best
}

fn assignment(cost: &[Vec<u8>]) -> MilpModel {
    let n = cost.len();
    let mut m = MilpModel::new(Direction::Minimize);
    let mut x = vec![Vec::new(); n];
    for (i, row) in x.iter_mut().enumerate() {
        for j in 0..n {
            row.push(m.add_variable(Variable::continuous(format!("x{i}_{j}"), 0.0, f64::INFINITY)).unwrap());
        }
    }
    for i in 0..n {
        let r = (0..n).fold(LinearExpr::new(), |e, j| e.term(x[i][j], 1.0));
        m.add_constraint(format!("row{i}"), r, Sense::Eq, 1.0).unwrap();
        let c = (0..n).fold(LinearExpr::new(), |e, j| e.term(x[j][i], 1.0));
        m.add_constraint(format!("col{i}"), c, Sense::Eq, 1.0).unwrap();
    }
    let obj = (0..n * n).fold(LinearExpr::new(), |e, k| e.term(x[k / n][k % n], cost[k / n][k % n] as f64));
    m.set_objective(obj).unwrap();
    m
}

/// Cheapest permutation by brute force.
fn cheapest_permutation(cost: &[Vec<u8>]) -> u32 {
    fn rec(cost: &[Vec<u8>], row: usize, used: &mut Vec<bool>) -> u32 {
        if row == cost.len() {
            return 0;
        }
        let mut best = u32::MAX;
        for j in 0..cost.len() {
            if !used[j] {
                used[j] = true;
                best = best.min(cost[row][j] as u32 + rec(cost, row + 1, used));
                used[j] = false;
            }
        }
        best
    }
    rec(cost, 0, &mut vec![false; cost.len()])
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn milp_matches_enumeration(s in spec(8)) {
        let m = build(&s);
        let got = solve_milp(&m, &SolveOptions::default());
        match enumerate(&m) {
            None => prop_assert_eq!(got.status, Status::Infeasible),
            Some(best) => {
                prop_assert_eq!(got.status, Status::Optimal);
                prop_assert!(rel_close(got.objective, best, 1e-6), "{} vs {}", got.objective, best);
                prop_assert!(m.max_violation(&got.values) <= 1e-7);
                prop_assert!(m.max_integrality_violation(&got.values) <= 1e-6);
            }
        }
    }

    #[test]
    fn lp_matches_vertex_enumeration(s in sized_spec(3, 2, 5)) {
        let m = build(&s);
        let got = solve_lp(&m);
        match vertex_oracle(&m) {
            None => prop_assert_eq!(got.status, Status::Infeasible),
            Some(z) => {
                prop_assert_eq!(got.status, Status::Optimal);
                prop_assert!(rel_close(got.objective, z, 1e-7), "{} vs {}", got.objective, z);
                prop_assert!(m.max_violation(&got.values) <= 1e-7);
            }
        }
    }

    #[test]
    fn relaxation_bounds_the_milp(s in spec(8)) {
        let mut m = build(&s);
        m.set_direction(Direction::Maximize);
        let lp = solve_lp(&m);
        let ip = solve_milp(&m, &SolveOptions::default());
        if ip.is_optimal() {
            prop_assert!(lp.is_optimal());
            prop_assert!(ip.objective <= lp.objective + 1e-7);
        }
    }

    #[test]
    fn solves_are_deterministic(s in spec(8)) {
        let m = build(&s);
        let a = solve_milp(&m, &SolveOptions::default());
        let b = solve_milp(&m, &SolveOptions::default());
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.values, b.values);
    }

    #[test]
    fn lp_text_round_trips(s in spec(6)) {
        let m = build(&s);
        let text = export_lp_file(&m);
        let back = parse_lp_file(&text).unwrap();
        prop_assert_eq!(export_lp_file(&back), text);
        prop_assert_eq!(back.num_binaries(), m.num_binaries());
    }

    // Assignment LPs are highly degenerate; small integer costs force ties.
    #[test]
    fn degenerate_assignment_lp(cost in (2usize..=7).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(0u8..4, n), n))) {
        let m = assignment(&cost);
        let got = solve_lp(&m);
        prop_assert_eq!(got.status, Status::Optimal);
        prop_assert!((got.objective - cheapest_permutation(&cost) as f64).abs() <= 1e-7);
        prop_assert!(m.max_violation(&got.values) <= 1e-7);
    }
    #[test]
    fn warm_start_with_appended_rows_matches_cold(s in spec(6), extra in prop::collection::vec((prop::collection::vec(-5i32..=5, 10), 0u8..3, -4i32..=12), 1..4)) {
        let base = build(&s);
        let Some(start) = solve_lp(&base).basis else { return Ok(()) };
        let mut m = base.clone();
        let vars: Vec<_> = m.var_ids().collect();
        for (k, (coefs, sense, rhs)) in extra.iter().enumerate() {
            let expr = coefs.iter().zip(&vars).fold(LinearExpr::new(), |e, (&c, &v)| e.term(v, c as f64));
            let sense = [Sense::Le, Sense::Ge, Sense::Eq][*sense as usize];
            m.add_constraint(format!("extra{k}"), expr, sense, *rhs as f64).unwrap();
        }
        let cold = solve_milp(&m, &SolveOptions::default());
        let warm = solve_milp_from(&m, &SolveOptions::default(), &start);
        prop_assert_eq!(cold.status, warm.status);
        if cold.is_optimal() {
            prop_assert!(rel_close(cold.objective, warm.objective, 1e-6), "{} vs {}", cold.objective, warm.objective);
            prop_assert!(m.max_violation(&warm.values) <= 1e-7);
        }
    }
}
