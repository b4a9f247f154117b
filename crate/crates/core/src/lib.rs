//! Virtual power plant scheduling and bidding under uncertainty.

mod error;

pub mod check;
pub mod contracts;
pub mod dataset;
pub mod offering;
pub mod probust;
pub mod scenario;
pub mod vpp;

pub use error::{Result, VppError};
