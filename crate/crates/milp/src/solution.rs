use crate::model::VarId;
use crate::simplex::Snapshot;

/// A simplex basis, reusable as a starting point for a model with the same
/// variables and possibly extra constraints appended.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub(crate) snapshot: Snapshot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// Node or iteration budget exhausted. `values` holds the incumbent if one exists.
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: Status,
    /// One entry per model variable; empty when no point is available.
    pub values: Vec<f64>,
    /// Objective in the model's own direction, constant included.
    pub objective: f64,
    /// Relative gap between incumbent and best bound.
    pub gap: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    /// Optimal basis of the LP, or of the root relaxation under branch and bound.
    pub basis: Option<Basis>,
}

impl MilpSolution {
    pub(crate) fn without_point(status: Status, nodes: usize, lp_iterations: usize) -> Self {
        MilpSolution {
            status,
            values: Vec::new(),
            objective: f64::NAN,
            gap: f64::INFINITY,
            nodes,
            lp_iterations,
            basis: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn has_point(&self) -> bool {
        !self.values.is_empty()
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    /// Relative MIP gap at which branch and bound stops.
    pub gap_tol: f64,
    pub node_limit: usize,
    /// Simplex iteration cap per LP solve.
    pub iteration_limit: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            feasibility_tol: 1e-7,
            integrality_tol: 1e-6,
            gap_tol: 1e-6,
            node_limit: 200_000,
            iteration_limit: 2_000_000,
        }
    }
}

impl SolveOptions {
    pub fn with_gap(mut self, gap_tol: f64) -> Self {
        self.gap_tol = gap_tol;
        self
    }

    pub fn with_node_limit(mut self, node_limit: usize) -> Self {
        self.node_limit = node_limit;
        self
    }
}
