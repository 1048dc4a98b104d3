use super::pop;
use crate::{Mode, Scalar, Tensor};

#[derive(Default)]
pub struct Relu<T> {
    tape: Vec<Tensor<T>>,
}

impl<T: Scalar> Relu<T> {
    pub fn new() -> Self {
        Self { tape: Vec::new() }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Tensor<T> {
        let y = x.map(|v| v.max(T::zero()));
        if mode == Mode::Train {
            self.tape.push(y.clone());
        }
        y
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        let y = pop(&mut self.tape, "relu");
        dy.zip_with(&y, |g, out| if out > T::zero() { g } else { T::zero() })
            .expect("relu gradient shape")
    }

    pub fn clear_tape(&mut self) {
        self.tape.clear();
    }
}

pub struct LeakyRelu<T> {
    slope: T,
    tape: Vec<Tensor<T>>,
}

impl<T: Scalar> LeakyRelu<T> {
    pub fn new(slope: f64) -> Self {
        Self {
            slope: T::lit(slope),
            tape: Vec::new(),
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Tensor<T> {
        let s = self.slope;
        let y = x.map(|v| if v > T::zero() { v } else { v * s });
        if mode == Mode::Train {
            self.tape.push(x.clone());
        }
        y
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        let x = pop(&mut self.tape, "leaky_relu");
        let s = self.slope;
        dy.zip_with(&x, |g, v| if v > T::zero() { g } else { g * s })
            .expect("leaky relu gradient shape")
    }

    pub fn clear_tape(&mut self) {
        self.tape.clear();
    }
}

#[derive(Default)]
pub struct Tanh<T> {
    tape: Vec<Tensor<T>>,
}

impl<T: Scalar> Tanh<T> {
    pub fn new() -> Self {
        Self { tape: Vec::new() }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Tensor<T> {
        let y = x.map(|v| v.tanh());
        if mode == Mode::Train {
            self.tape.push(y.clone());
        }
        y
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        let y = pop(&mut self.tape, "tanh");
        dy.zip_with(&y, |g, out| g * (T::one() - out * out))
            .expect("tanh gradient shape")
    }

    pub fn clear_tape(&mut self) {
        self.tape.clear();
    }
}
