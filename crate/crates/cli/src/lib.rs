//! Pipeline behind the `vpp` binary: load a dataset, run the solves, and
//! write CSV reports with a run manifest.

pub mod commands;
mod error;
pub mod report;

pub use commands::{
    cmd_dag, cmd_export_lp, cmd_generate, cmd_offer_curves, cmd_solve, cmd_sweep, cmd_validate, DagOutcome, GridSpec,
    ModelSelector, RunOptions, SweepOutcome, ValidationReport,
};
pub use error::{CliError, EXIT_IO, EXIT_SOLVER, EXIT_VALIDATION};
