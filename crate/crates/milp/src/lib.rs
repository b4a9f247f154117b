//! Mixed-integer linear programming with binary variables.
//!
//! Build a [`MilpModel`], then call [`solve_lp`] for the continuous relaxation
//! or [`solve_milp`] for branch and bound. [`export_lp_file`] writes the model
//! in CPLEX LP format so another solver can check the result.
//!
//! ```
//! use milp_core::{solve_milp, Direction, LinearExpr, MilpModel, Sense, SolveOptions, Variable};
//!
//! let mut m = MilpModel::new(Direction::Maximize);
//! let a = m.add_variable(Variable::binary("a")).unwrap();
//! let b = m.add_variable(Variable::binary("b")).unwrap();
//! m.add_constraint("pick_one", LinearExpr::from(a) + LinearExpr::from(b), Sense::Le, 1.0).unwrap();
//! m.set_objective(LinearExpr::new().term(a, 5.0).term(b, 4.0)).unwrap();
//!
//! let sol = solve_milp(&m, &SolveOptions::default());
//! assert!(sol.is_optimal());
//! assert_eq!(sol.objective, 5.0);
//! assert_eq!(sol.value(a), 1.0);
//! ```

mod branch;
mod error;
mod lp_format;
mod lu;
mod model;
mod simplex;
mod solution;

pub use error::{LpParseError, ModelError};
pub use lp_format::{export_lp_file, parse_lp_file};
pub use model::{Constraint, Direction, LinearExpr, MilpModel, Sense, VarId, VarKind, Variable};
pub use solution::{Basis, MilpSolution, SolveOptions, Status};

use simplex::{LpStatus, Simplex, StandardForm};

/// Solves the continuous relaxation: binaries are treated as `[0, 1]` reals.
pub fn solve_lp(model: &MilpModel) -> MilpSolution {
    solve_lp_with(model, &SolveOptions::default())
}

pub fn solve_lp_with(model: &MilpModel, options: &SolveOptions) -> MilpSolution {
    let sf = StandardForm::from_model(model);
    let mut lp = Simplex::new(&sf, options.iteration_limit);
    let status = match lp.primal() {
        LpStatus::Optimal => Status::Optimal,
        LpStatus::Infeasible => Status::Infeasible,
        LpStatus::Unbounded => Status::Unbounded,
        LpStatus::IterationLimit => Status::IterationLimit,
    };
    if status != Status::Optimal {
        return MilpSolution::without_point(status, 0, lp.iterations);
    }
    let values = lp.values().to_vec();
    MilpSolution {
        status,
        objective: model.objective().evaluate(&values),
        values,
        gap: 0.0,
        nodes: 0,
        lp_iterations: lp.iterations,
        basis: Some(Basis { snapshot: lp.snapshot() }),
    }
}

/// Best-first branch and bound on fractional binaries, diving depth-first
/// until the first incumbent.
pub fn solve_milp(model: &MilpModel, options: &SolveOptions) -> MilpSolution {
    branch::branch_and_bound(model, options, None)
}

/// Like [`solve_milp`], starting the root relaxation from `start` with the
/// dual simplex. `start` may come from a model with fewer constraints; a basis
/// that does not fit the model is ignored.
pub fn solve_milp_from(model: &MilpModel, options: &SolveOptions, start: &Basis) -> MilpSolution {
    branch::branch_and_bound(model, options, Some(start))
}
