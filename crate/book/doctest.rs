//! Every chapter of the guide as a module, so `cargo test` runs its code
//! blocks against the current library.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/simulator.md")]
pub mod simulator {}
#[doc = include_str!("src/data.md")]
pub mod data {}
#[doc = include_str!("src/model.md")]
pub mod model {}
#[doc = include_str!("src/training.md")]
pub mod training {}
#[doc = include_str!("src/metrics.md")]
pub mod metrics {}
#[doc = include_str!("src/experiments.md")]
pub mod experiments {}
