//! The guide's chapters as doc comments, so `cargo test` runs their listings.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/getting-started.md")]
pub mod getting_started {}
#[doc = include_str!("../../../book/src/solver.md")]
pub mod solver {}
#[doc = include_str!("../../../book/src/contracts.md")]
pub mod contracts {}
#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}
#[doc = include_str!("../../../book/src/stochastic.md")]
pub mod stochastic {}
#[doc = include_str!("../../../book/src/regret.md")]
pub mod regret {}
#[doc = include_str!("../../../book/src/data-format.md")]
pub mod data_format {}
#[doc = include_str!("../../../book/src/outputs.md")]
pub mod outputs {}
#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}
