//! Cross-modal prediction between a top-down camera and a gel touch sensor.
//!
//! The crate bundles a deterministic simulator that produces paired
//! vision/touch sequences, the data pipeline, a reference-conditioned
//! encoder-decoder generator with a patch discriminator, the adversarial
//! training loop, and the contact metrics used to score predictions.

pub mod error;
pub mod image;
pub mod model;
pub mod data;
pub mod eval;
pub mod experiment;
pub mod synthgel;
pub mod train;

pub use error::{Error, Result};
