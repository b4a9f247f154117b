//! Branch and bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;

use crate::model::MilpModel;
use crate::simplex::{LpStatus, Simplex, Snapshot, StandardForm};
use crate::solution::{Basis, MilpSolution, SolveOptions, Status};

/// Persistent list of binary fixings from the root to a node.
struct Fix {
    var: usize,
    value: f64,
    parent: Option<Rc<Fix>>,
}

struct Node {
    id: usize,
    /// Parent LP value, internal minimization sense.
    bound: f64,
    fixes: Option<Rc<Fix>>,
    basis: Rc<Snapshot>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap pops the greatest, so the smallest bound must compare greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

struct Incumbent {
    values: Vec<f64>,
    objective: f64,
}

pub(crate) fn branch_and_bound(model: &MilpModel, options: &SolveOptions, start: Option<&Basis>) -> MilpSolution {
    let sf = StandardForm::from_model(model);
    let binaries: Vec<usize> = model
        .variables()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_binary())
        .map(|(j, _)| j)
        .collect();
    let offset = sf.obj_sign * sf.obj_constant;
    let mut lp = Simplex::new(&sf, options.iteration_limit);
    let mut total_iterations = 0usize;

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut dive: Option<Node> = None;
    let mut incumbent: Option<Incumbent> = None;
    let mut next_id = 0usize;
    let mut nodes = 0usize;
    let mut root = true;
    let mut hit_limit = false;
    let mut root_basis = None;

    let cutoff = |inc: &Option<Incumbent>| -> f64 {
        match inc {
            Some(i) => i.objective - options.gap_tol * i.objective.abs().max(1.0),
            None => f64::INFINITY,
        }
    };

    loop {
        let node = if root {
            None
        } else if let Some(n) = dive.take() {
            Some(n)
        } else if let Some(n) = heap.pop() {
            if n.bound >= cutoff(&incumbent) {
                heap.push(n);
                break;
            }
            Some(n)
        } else {
            break;
        };
        if nodes >= options.node_limit {
            if let Some(n) = node {
                heap.push(n);
            }
            hit_limit = true;
            break;
        }
        nodes += 1;

        lp.iterations = 0;
        let status = match &node {
            None => match start.and_then(|b| b.snapshot.extended(sf.n, sf.m)) {
                Some(snap) => {
                    lp.restore(&snap);
                    lp.dual()
                }
                None => lp.primal(),
            },
            Some(n) => {
                for &j in &binaries {
                    lp.set_bounds(j, sf.lower[j], sf.upper[j]);
                }
                let mut f = n.fixes.as_ref();
                while let Some(fix) = f {
                    lp.set_bounds(fix.var, fix.value, fix.value);
                    f = fix.parent.as_ref();
                }
                lp.restore(&n.basis);
                lp.dual()
            }
        };
        total_iterations += lp.iterations;
        let was_root = root;
        root = false;
        match status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded if was_root => {
                return MilpSolution::without_point(Status::Unbounded, nodes, total_iterations);
            }
            LpStatus::Unbounded => continue,
            LpStatus::IterationLimit => {
                hit_limit = true;
                break;
            }
        }
        if was_root {
            root_basis = Some(Basis { snapshot: lp.snapshot() });
        }
        let value = lp.objective() + offset;
        if value >= cutoff(&incumbent) {
            continue;
        }

        let x = lp.values();
        let mut branch_var = usize::MAX;
        let mut best_frac = options.integrality_tol;
        for &j in &binaries {
            let frac = x[j].min(1.0 - x[j]);
            if frac > best_frac {
                best_frac = frac;
                branch_var = j;
            }
        }

        if branch_var == usize::MAX {
            let values = polish(&mut lp, &binaries, &mut total_iterations);
            let objective = sf.obj_sign * model.objective().evaluate(&values);
            if incumbent.as_ref().map_or(true, |inc| objective < inc.objective) {
                incumbent = Some(Incumbent { values, objective });
            }
            continue;
        }

        let basis = Rc::new(lp.snapshot());
        let up_first = x[branch_var] >= 0.5;
        let parent = node.and_then(|n| n.fixes);
        let mut make = |v: f64| {
            next_id += 1;
            Node {
                id: next_id,
                bound: value,
                fixes: Some(Rc::new(Fix { var: branch_var, value: v, parent: parent.clone() })),
                basis: Rc::clone(&basis),
            }
        };
        let (preferred, other) = if up_first { (make(1.0), make(0.0)) } else { (make(0.0), make(1.0)) };
        heap.push(other);
        if incumbent.is_none() {
            dive = Some(preferred);
        } else {
            heap.push(preferred);
        }
    }

    let remaining = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    match incumbent {
        Some(inc) => {
            let bound = remaining.min(inc.objective);
            let gap = ((inc.objective - bound) / inc.objective.abs().max(1.0)).max(0.0);
            let status = if hit_limit && gap > options.gap_tol { Status::IterationLimit } else { Status::Optimal };
            MilpSolution {
                status,
                objective: sf.obj_sign * inc.objective,
                values: inc.values,
                gap,
                nodes,
                lp_iterations: total_iterations,
                basis: root_basis,
            }
        }
        None if hit_limit => MilpSolution::without_point(Status::IterationLimit, nodes, total_iterations),
        None => MilpSolution::without_point(Status::Infeasible, nodes, total_iterations),
    }
}

/// Rounds the binaries of an integral LP point and re-solves for the continuous part.
fn polish(lp: &mut Simplex<'_>, binaries: &[usize], iterations: &mut usize) -> Vec<f64> {
    let rounded: Vec<f64> = lp.values().to_vec();
    let snap = lp.snapshot();
    let saved: Vec<(f64, f64)> = binaries.iter().map(|&j| lp.bounds(j)).collect();
    for &j in binaries {
        let v = rounded[j].round();
        lp.set_bounds(j, v, v);
    }
    lp.iterations = 0;
    let status = lp.dual();
    *iterations += lp.iterations;
    let mut values = if status == LpStatus::Optimal { lp.values().to_vec() } else { rounded };
    for &j in binaries {
        values[j] = values[j].round();
    }
    for (&j, &(l, u)) in binaries.iter().zip(&saved) {
        lp.set_bounds(j, l, u);
    }
    lp.restore(&snap);
    values
}
