//! A deliberately small neural-network engine for CPU training.
//!
//! Layers own their parameters and keep a *tape* of forward-pass caches.
//! Every [`Mode::Train`] forward pushes one cache entry and every backward
//! pops one, so a layer may be run several times before its gradients are
//! pulled back, as long as the backward calls happen in reverse order.
//! [`Mode::Eval`] records nothing and switches normalization layers to their
//! running statistics.
//!
//! All tensors are `NCHW` and generic over [`Scalar`] so the same network can
//! be instantiated in `f64` for finite-difference gradient checks.

mod error;
pub mod init;
pub mod layers;
pub mod linalg;
pub mod optim;
mod param;
mod scalar;
mod tensor;

pub use error::ShapeError;
pub use param::{Param, Slot, Visit};
pub use scalar::Scalar;
pub use tensor::Tensor;

/// Forward-pass mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; caches recorded for backward.
    Train,
    /// Running statistics; nothing recorded.
    Eval,
}
