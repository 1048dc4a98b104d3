//! Layers with explicit forward/backward passes.

mod activation;
mod conv;
mod norm;
mod pool;

pub use activation::{LeakyRelu, Relu, Tanh};
pub use conv::{Conv2d, ConvTranspose2d};
pub use norm::BatchNorm2d;
pub use pool::MaxPool2d;

fn pop<C>(tape: &mut Vec<C>, layer: &str) -> C {
    tape.pop()
        .unwrap_or_else(|| panic!("{layer}: backward called without a recorded forward"))
}
